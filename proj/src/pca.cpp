#include "tdex/pca.hpp"

#include <cmath>
#include <string>

#include "tdex/error.hpp"

namespace tdex {

Eigen::VectorXd PcaModel::explained_variance_ratio() const {
    if (!(total_variance > 0.0)) return Eigen::VectorXd::Zero(explained_variance.size());
    return explained_variance / total_variance;
}

PcaModel pca_fit(const Eigen::MatrixXd& data, std::size_t k) {
    const auto n = static_cast<std::size_t>(data.rows());
    const auto d = static_cast<std::size_t>(data.cols());
    if (k == 0 || k > d || k > n) {
        throw UsageError("PCA needs 0 < k <= min(n, d); got k=" + std::to_string(k) + ", n=" +
                         std::to_string(n) + ", d=" + std::to_string(d));
    }
    PcaModel model;
    model.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    model.total_variance = cov.trace();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw InvariantError("covariance eigen-decomposition failed");
    // Eigen returns ascending eigenvalues.
    model.components.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    model.explained_variance.resize(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        const Eigen::Index src = static_cast<Eigen::Index>(d - 1 - i);
        Eigen::VectorXd v = eig.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        model.components.row(static_cast<Eigen::Index>(i)) = v.transpose();
        model.explained_variance(static_cast<Eigen::Index>(i)) = std::max(eig.eigenvalues()(src), 0.0);
    }
    return model;
}

Eigen::MatrixXd frames_matrix(std::span<const TactileFrame> frames) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(kTactileDim));
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto v = frames[i].flat();
        for (std::size_t j = 0; j < kTactileDim; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
        }
    }
    return m;
}

PcaModel pca_fit(std::span<const TactileFrame> frames, std::size_t k) {
    return pca_fit(frames_matrix(frames), k);
}

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.mean.size()) {
        throw DataError("PCA input has dimension " + std::to_string(x.size()) + ", expected " +
                        std::to_string(model.mean.size()));
    }
    return model.components * (x - model.mean);
}

std::vector<double> pca_project(const PcaModel& model, const TactileFrame& frame) {
    const auto v = frame.flat();
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    const Eigen::VectorXd z = pca_project(model, x);
    return {z.data(), z.data() + z.size()};
}

Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& z) {
    if (z.size() != model.components.rows()) {
        throw DataError("PCA code has dimension " + std::to_string(z.size()) + ", expected " +
                        std::to_string(model.components.rows()));
    }
    return model.mean + model.components.transpose() * z;
}

}  // namespace tdex
