#include "tdex/report.hpp"

#include <algorithm>
#include <fstream>

#include "tdex/error.hpp"

namespace tdex {

namespace {

struct Table {
    std::string source;  // file name inside a run directory
    std::string target;  // file name in the report
    std::string header;
};

const std::vector<Table>& tables() {
    static const std::vector<Table> t = {
        {"results.tsv", "summary.tsv", "kind\tvariant\tplay_fraction\treplicates\tepisodes\tsuccesses\tsuccess_rate"},
        {"episodes.tsv", "episodes.tsv", "kind\tvariant\tplay_fraction\treplicate\tepisode\tseed\tsuccess\tsteps"},
        {"traces.tsv", "traces.tsv", "kind\tvariant\tplay_fraction\treplicate\tepisode\tstep\tneighbor\tdistance"},
        {"losses.tsv", "losses.tsv", "encoder\treplicate\tepoch\tloss"},
    };
    return t;
}

std::size_t count_tabs(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\t')); }

std::string run_label(const std::filesystem::path& run) {
    auto p = run.lexically_normal();
    if (p.filename().empty()) p = p.parent_path();
    return p.filename().string();
}

}  // namespace

const std::vector<std::string>& report_tables() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& t : tables()) n.push_back(t.target);
        return n;
    }();
    return names;
}

ReportCounts write_report(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out) {
    ReportCounts counts;
    counts.runs = runs.size();
    std::filesystem::create_directories(out);
    for (std::size_t ti = 0; ti < tables().size(); ++ti) {
        const Table& t = tables()[ti];
        std::ofstream dst(out / t.target, std::ios::binary);
        if (!dst) throw DataError("cannot write " + (out / t.target).string());
        dst << "run\t" << t.header << '\n';
        std::size_t rows = 0;
        for (const auto& run : runs) {
            const auto path = run / t.source;
            std::ifstream src(path, std::ios::binary);
            if (!src) throw DataError("malformed run directory " + run.string() + ": missing " + t.source);
            std::string line;
            if (!std::getline(src, line) || line != t.header) {
                throw DataError("malformed run directory " + run.string() + ": unexpected header in " + t.source);
            }
            std::size_t line_no = 1;
            while (std::getline(src, line)) {
                ++line_no;
                if (line.empty()) continue;
                if (count_tabs(line) != count_tabs(t.header)) {
                    throw DataError(path.string() + ":" + std::to_string(line_no) + ": wrong column count");
                }
                dst << run_label(run) << '\t' << line << '\n';
                ++rows;
            }
        }
        switch (ti) {
            case 0: counts.results = rows; break;
            case 1: counts.episodes = rows; break;
            case 2: counts.traces = rows; break;
            default: counts.losses = rows; break;
        }
    }
    return counts;
}

}  // namespace tdex
