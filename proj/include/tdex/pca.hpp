#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tdex/core.hpp"

namespace tdex {

/// Principal components of flattened tactile frames (or any row-sample matrix).
struct PcaModel {
    Eigen::VectorXd mean;                // d
    Eigen::MatrixXd components;          // k x d, orthonormal rows
    Eigen::VectorXd explained_variance;  // k, non-increasing
    double total_variance = 0.0;         // trace of the covariance

    std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
    std::size_t input_dim() const { return static_cast<std::size_t>(mean.size()); }

    Eigen::VectorXd explained_variance_ratio() const;
};

/// Top-k eigenvectors of the sample covariance of the rows of `data` (n x d).
/// Sign convention: the largest-magnitude entry of each component is positive.
/// Throws UsageError for k == 0, k > d or k > n.
PcaModel pca_fit(const Eigen::MatrixXd& data, std::size_t k);
PcaModel pca_fit(std::span<const TactileFrame> frames, std::size_t k);

Eigen::MatrixXd frames_matrix(std::span<const TactileFrame> frames);

/// components * (x - mean); throws DataError on dimension mismatch.
Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& x);
std::vector<double> pca_project(const PcaModel& model, const TactileFrame& frame);

/// mean + components^T * z
Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& z);

}  // namespace tdex
