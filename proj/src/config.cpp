#include "tdex/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "tdex/contact_world.hpp"
#include "tdex/error.hpp"

namespace tdex {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw UsageError("config key '" + std::string(key) + "': not a number: '" + std::string(v) + "'");
    }
    return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw UsageError("config key '" + std::string(key) + "': not a non-negative integer: '" +
                         std::string(v) + "'");
    }
    return out;
}

std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        const auto item = trim(v.substr(0, comma));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

struct Field {
    std::string_view key;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::optional<std::string>(const RunConfig&)> get;  // nullopt: omitted
};

template <class T>
Field uint_field(std::string_view key, T RunConfig::*m) {
    return {key, [=](RunConfig& c, std::string_view v) { c.*m = static_cast<T>(parse_uint(key, v)); },
            [=](const RunConfig& c) { return std::optional<std::string>(std::to_string(c.*m)); }};
}

Field double_field(std::string_view key, double RunConfig::*m) {
    return {key, [=](RunConfig& c, std::string_view v) { c.*m = parse_double(key, v); },
            [=](const RunConfig& c) { return std::optional<std::string>(fmt_double(c.*m)); }};
}

Field string_field(std::string_view key, std::string RunConfig::*m) {
    return {key, [=](RunConfig& c, std::string_view v) { c.*m = std::string(v); },
            [=](const RunConfig& c) { return std::optional<std::string>(c.*m); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        uint_field("seed", &RunConfig::seed),
        string_field("task", &RunConfig::task),
        string_field("play_dir", &RunConfig::play_dir),
        string_field("demo_dir", &RunConfig::demo_dir),
        string_field("out_dir", &RunConfig::out_dir),
        double_field("play_minutes", &RunConfig::play_minutes),
        uint_field("demos", &RunConfig::demos),
        double_field("play_threshold", &RunConfig::play_threshold),
        double_field("demo_threshold", &RunConfig::demo_threshold),
        string_field("arch", &RunConfig::arch),
        string_field("variant", &RunConfig::variant),
        uint_field("epochs", &RunConfig::epochs),
        uint_field("batch", &RunConfig::batch),
        uint_field("pca_k", &RunConfig::pca_k),
        uint_field("bc_epochs", &RunConfig::bc_epochs),
        {"weight_visual", [](RunConfig& c, std::string_view v) { c.weight_visual = parse_double("weight_visual", v); },
         [](const RunConfig& c) {
             return c.weight_visual ? std::optional<std::string>(fmt_double(*c.weight_visual)) : std::nullopt;
         }},
        {"weight_tactile",
         [](RunConfig& c, std::string_view v) { c.weight_tactile = parse_double("weight_tactile", v); },
         [](const RunConfig& c) {
             return c.weight_tactile ? std::optional<std::string>(fmt_double(*c.weight_tactile)) : std::nullopt;
         }},
        {"reject_k", [](RunConfig& c, std::string_view v) { c.reject_k = parse_uint("reject_k", v); },
         [](const RunConfig& c) {
             return c.reject_k ? std::optional<std::string>(std::to_string(*c.reject_k)) : std::nullopt;
         }},
        {"variants",
         [](RunConfig& c, std::string_view v) {
             c.variants.clear();
             for (auto item : split_list(v)) c.variants.emplace_back(item);
         },
         [](const RunConfig& c) {
             std::string s;
             for (const auto& v : c.variants) s += (s.empty() ? "" : ",") + v;
             return std::optional<std::string>(s);
         }},
        {"play_fractions",
         [](RunConfig& c, std::string_view v) {
             c.play_fractions.clear();
             for (auto item : split_list(v)) {
                 const double f = parse_double("play_fractions", item);
                 if (f < 0.0 || f > 1.0) throw UsageError("play fractions must lie in [0, 1]");
                 c.play_fractions.push_back(f);
             }
         },
         [](const RunConfig& c) {
             std::string s;
             for (double f : c.play_fractions) s += (s.empty() ? "" : ",") + fmt_double(f);
             return std::optional<std::string>(s);
         }},
        uint_field("episodes", &RunConfig::episodes),
        uint_field("replicates", &RunConfig::replicates),
        uint_field("trace_episodes", &RunConfig::trace_episodes),
    };
    return f;
}

}  // namespace

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& f : fields()) {
        if (f.key == key) {
            f.set(cfg, trim(value));
            return;
        }
    }
    throw UsageError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* s = std::getenv("TDEX_SEED"); s && *s) cfg.seed = parse_uint("TDEX_SEED", trim(s));
}

RunConfig resolved(RunConfig cfg) {
    const ContactWorldSpec spec = contact_world_spec(cfg.task);
    if (!cfg.weight_visual) cfg.weight_visual = spec.weights.visual;
    if (!cfg.weight_tactile) cfg.weight_tactile = spec.weights.tactile;
    if (!cfg.reject_k) cfg.reject_k = spec.reject_k;
    return cfg;
}

std::string to_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) {
        if (auto v = f.get(cfg)) out += std::string(f.key) + " = " + *v + "\n";
    }
    return out;
}

void write_snapshot(const std::filesystem::path& dir, const RunConfig& cfg) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "run_config.txt");
    if (!out) throw DataError("cannot write config snapshot into " + dir.string());
    out << to_text(cfg);
}

}  // namespace tdex
