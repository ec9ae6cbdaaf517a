#include "loadwatch/config.hpp"

#include <charconv>
#include <sstream>

#include "loadwatch/errors.hpp"
#include "loadwatch/util.hpp"

namespace loadwatch {

namespace {

std::int64_t to_int(const std::string& key, const std::string& value) {
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
    return out;
}

std::size_t to_positive(const std::string& key, const std::string& value) {
    const std::int64_t v = to_int(key, value);
    if (v <= 0) throw ConfigError("config: key '" + key + "' must be > 0");
    return static_cast<std::size_t>(v);
}

double to_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double out = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size())
        throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
    return out;
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::istringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(to_positive(key, trim(item)));
    if (out.empty()) throw ConfigError("config: key '" + key + "' expects a list");
    return out;
}

} // namespace

PipelineConfig parse_config_text(const std::string& content) {
    PipelineConfig cfg;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config: line " + std::to_string(line_no) + ": empty key or value");

        if (key == "r") {
            cfg.r = static_cast<std::int64_t>(to_positive(key, value));
        } else if (key == "input_length") {
            cfg.input_length = to_positive(key, value);
        } else if (key == "on_threshold") {
            cfg.on_threshold = to_double(key, value);
            if (cfg.on_threshold < 0) throw ConfigError("config: on_threshold must be >= 0");
        } else if (key == "merge_gap_max") {
            cfg.merge_gap_max = to_int(key, value);
            if (cfg.merge_gap_max < 0) throw ConfigError("config: merge_gap_max must be >= 0");
        } else if (key == "max_duration") {
            cfg.max_duration = static_cast<std::int64_t>(to_positive(key, value));
        } else if (key == "column") {
            cfg.column = value;
        } else if (key == "norm_max") {
            if (value == "train_max") {
                cfg.norm_max_policy = "train_max";
            } else {
                cfg.norm_max_policy = "fixed";
                cfg.norm_max_fixed = to_double(key, value);
                if (cfg.norm_max_fixed <= 0)
                    throw ConfigError("config: fixed norm_max must be > 0");
            }
        } else if (key == "model") {
            cfg.model = model_kind_from_string(value);
        } else if (key == "split") {
            cfg.split = eval::SplitSpec::from_label(value);
        } else if (key == "epochs") {
            cfg.train_run.epochs = to_positive(key, value);
        } else if (key == "batch_size") {
            cfg.train_run.batch_size = to_positive(key, value);
        } else if (key == "learning_rate") {
            cfg.train_run.learning_rate = to_double(key, value);
            if (!(cfg.train_run.learning_rate > 0))
                throw ConfigError("config: learning_rate must be > 0");
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
        } else if (key == "epsilon_floor") {
            cfg.epsilon_floor = to_double(key, value);
            if (cfg.epsilon_floor < 0) throw ConfigError("config: epsilon_floor must be >= 0");
        } else if (key == "cnn_filters") {
            const auto filters = to_size_list(key, value);
            if (filters.size() != 3)
                throw ConfigError("config: cnn_filters expects exactly 3 values");
            std::copy(filters.begin(), filters.end(), cfg.cnn.encoder_filters.begin());
        } else if (key == "cnn_kernel") {
            cfg.cnn.kernel_size = to_positive(key, value);
        } else if (key == "cnn_pool") {
            cfg.cnn.pool_s = to_positive(key, value);
        } else if (key == "cnn_dropout") {
            cfg.cnn.dropout_p = to_double(key, value);
            if (cfg.cnn.dropout_p < 0 || cfg.cnn.dropout_p >= 1)
                throw ConfigError("config: cnn_dropout must be in [0, 1)");
        } else if (key == "tcn_dilations") {
            cfg.tcn.dilations = to_size_list(key, value);
        } else if (key == "tcn_filters") {
            cfg.tcn.n_filters = to_positive(key, value);
        } else if (key == "tcn_kernel") {
            cfg.tcn.kernel = to_positive(key, value);
        } else if (key == "tcn_bottleneck") {
            cfg.tcn.bottleneck_filters = to_positive(key, value);
        } else if (key == "tcn_pool") {
            cfg.tcn.pool_s = to_positive(key, value);
        } else if (key == "synth_usages") {
            cfg.synth_usages = to_positive(key, value);
        } else if (key == "synth_anomalies") {
            cfg.synth_anomalies = static_cast<std::size_t>(to_int(key, value));
        } else {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    }

    cfg.cnn.input_length = cfg.input_length;
    cfg.tcn.input_length = cfg.input_length;
    cfg.train_run.seed = cfg.seed;
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    return parse_config_text(read_file(path));
}

std::string config_to_text(const PipelineConfig& cfg) {
    std::ostringstream out;
    out << "r = " << cfg.r << "\n";
    out << "input_length = " << cfg.input_length << "\n";
    out << "on_threshold = " << fmt_double(cfg.on_threshold) << "\n";
    out << "merge_gap_max = " << cfg.merge_gap_max << "\n";
    out << "max_duration = " << cfg.max_duration << "\n";
    out << "column = " << cfg.column << "\n";
    out << "norm_max = "
        << (cfg.norm_max_policy == "train_max" ? std::string("train_max")
                                               : fmt_double(cfg.norm_max_fixed))
        << "\n";
    out << "model = " << to_string(cfg.model) << "\n";
    out << "split = " << cfg.split.label << "\n";
    out << "epochs = " << cfg.train_run.epochs << "\n";
    out << "batch_size = " << cfg.train_run.batch_size << "\n";
    out << "learning_rate = " << fmt_double(cfg.train_run.learning_rate) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "epsilon_floor = " << fmt_double(cfg.epsilon_floor) << "\n";
    out << "cnn_filters = " << cfg.cnn.encoder_filters[0] << ',' << cfg.cnn.encoder_filters[1]
        << ',' << cfg.cnn.encoder_filters[2] << "\n";
    out << "cnn_kernel = " << cfg.cnn.kernel_size << "\n";
    out << "cnn_pool = " << cfg.cnn.pool_s << "\n";
    out << "cnn_dropout = " << fmt_double(cfg.cnn.dropout_p) << "\n";
    out << "tcn_dilations = ";
    for (std::size_t i = 0; i < cfg.tcn.dilations.size(); ++i)
        out << (i ? "," : "") << cfg.tcn.dilations[i];
    out << "\n";
    out << "tcn_filters = " << cfg.tcn.n_filters << "\n";
    out << "tcn_kernel = " << cfg.tcn.kernel << "\n";
    out << "tcn_bottleneck = " << cfg.tcn.bottleneck_filters << "\n";
    out << "tcn_pool = " << cfg.tcn.pool_s << "\n";
    out << "synth_usages = " << cfg.synth_usages << "\n";
    out << "synth_anomalies = " << cfg.synth_anomalies << "\n";
    return out.str();
}

} // namespace loadwatch
