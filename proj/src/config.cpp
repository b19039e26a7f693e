#include "sws/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "sws/binary_io.hpp"
#include "sws/errors.hpp"

namespace sws {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, const char* expected) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                      expected);
}

double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "a number");
    return out;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
    Int out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "an integer");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad(key, v, "a boolean");
}

std::vector<int> to_int_list(std::string_view key, std::string_view v) {
    std::vector<int> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        out.push_back(to_int<int>(key, trim(v.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

struct Field {
    std::function<void(ExperimentConfig&, std::string_view, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

std::string num(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

#define SWS_DOUBLE(name, member) \
    {name, {[](ExperimentConfig& c, std::string_view k, std::string_view v) { c.member = to_double(k, v); }, \
            [](const ExperimentConfig& c) { return num(c.member); }}}
#define SWS_INT(name, type, member) \
    {name, {[](ExperimentConfig& c, std::string_view k, std::string_view v) { c.member = to_int<type>(k, v); }, \
            [](const ExperimentConfig& c) { return std::to_string(c.member); }}}
#define SWS_BOOL(name, member) \
    {name, {[](ExperimentConfig& c, std::string_view k, std::string_view v) { c.member = to_bool(k, v); }, \
            [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); }}}
#define SWS_STRING(name, member) \
    {name, {[](ExperimentConfig& c, std::string_view, std::string_view v) { c.member = std::string(v); }, \
            [](const ExperimentConfig& c) { return c.member; }}}

const std::map<std::string, Field, std::less<>>& fields() {
    static const std::map<std::string, Field, std::less<>> table = {
        SWS_STRING("data_dir", data_dir),
        SWS_STRING("output_dir", output_dir),
        SWS_STRING("pretrained_path", pretrained_path),
        {"layers",
         {[](ExperimentConfig& c, std::string_view k, std::string_view v) { c.layers = to_int_list(k, v); },
          [](const ExperimentConfig& c) {
              std::string s;
              for (std::size_t i = 0; i < c.layers.size(); ++i) s += (i ? "," : "") + std::to_string(c.layers[i]);
              return s;
          }}},
        {"seed",
         {[](ExperimentConfig& c, std::string_view k, std::string_view v) {
              c.seed = to_int<std::uint64_t>(k, v);
              c.pretrain.seed = c.seed + 1;
              c.train.seed = c.seed + 2;
          },
          [](const ExperimentConfig& c) { return std::to_string(c.seed); }}},
        SWS_INT("train_limit", Eigen::Index, train_limit),
        SWS_INT("test_limit", Eigen::Index, test_limit),
        SWS_INT("pretrain_epochs", int, pretrain.epochs),
        SWS_INT("pretrain_batch_size", int, pretrain.batch_size),
        SWS_DOUBLE("pretrain_lr", pretrain.lr),
        SWS_DOUBLE("weight_decay", pretrain.weight_decay),
        SWS_DOUBLE("tau", train.tau),
        SWS_BOOL("per_sample_complexity", train.per_sample_complexity),
        SWS_INT("epochs", int, train.epochs),
        SWS_INT("batch_size", int, train.batch_size),
        SWS_DOUBLE("lr_weights", train.lr_weights),
        SWS_DOUBLE("lr_means", train.lr_means),
        SWS_DOUBLE("lr_logvars", train.lr_logvars),
        SWS_DOUBLE("lr_logits", train.lr_logits),
        SWS_DOUBLE("adam_beta1", train.adam.beta1),
        SWS_DOUBLE("adam_beta2", train.adam.beta2),
        SWS_DOUBLE("adam_epsilon", train.adam.epsilon),
        {"subsample_k",
         {[](ExperimentConfig& c, std::string_view k, std::string_view v) {
              const auto n = to_int<Eigen::Index>(k, v);
              if (n > 0) {
                  c.train.subsample_k = n;
              } else {
                  c.train.subsample_k.reset();
              }
          },
          [](const ExperimentConfig& c) { return std::to_string(c.train.subsample_k.value_or(0)); }}},
        SWS_DOUBLE("variance_floor", train.variance_floor),
        SWS_BOOL("divergence_guard", train.divergence_guard),
        SWS_INT("components", int, components),
        SWS_DOUBLE("pi0", pi0),
        SWS_BOOL("pi0_trainable", pi0_trainable),
        SWS_BOOL("gamma_zero_enabled", hyper.gamma_zero.enabled),
        SWS_DOUBLE("gamma_zero_alpha", hyper.gamma_zero.alpha),
        SWS_DOUBLE("gamma_zero_beta", hyper.gamma_zero.beta),
        SWS_BOOL("gamma_rest_enabled", hyper.gamma_rest.enabled),
        SWS_DOUBLE("gamma_rest_alpha", hyper.gamma_rest.alpha),
        SWS_DOUBLE("gamma_rest_beta", hyper.gamma_rest.beta),
        SWS_BOOL("beta_pi0_enabled", hyper.beta_pi0.enabled),
        SWS_DOUBLE("beta_pi0_alpha", hyper.beta_pi0.alpha),
        SWS_DOUBLE("beta_pi0_beta", hyper.beta_pi0.beta),
        SWS_BOOL("tau_scales_hyperprior", hyper.tau_scales_hyperprior),
        SWS_DOUBLE("kl_threshold", merge.kl_threshold),
        SWS_INT("max_merge_passes", int, merge.max_passes),
        SWS_DOUBLE("zero_snap", merge.zero_snap),
        SWS_INT("p_fc", int, p_fc),
        SWS_INT("p_conv", int, p_conv),
    };
    return table;
}

#undef SWS_DOUBLE
#undef SWS_INT
#undef SWS_BOOL
#undef SWS_STRING

}  // namespace

const std::vector<std::string>& ExperimentConfig::keys() {
    static const std::vector<std::string> out = [] {
        std::vector<std::string> k;
        for (const auto& [name, _] : fields()) k.push_back(name);
        return k;
    }();
    return out;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    it->second.set(*this, key, trim(value));
}

void ExperimentConfig::apply_text(std::string_view text) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    ExperimentConfig cfg;
    cfg.apply_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    return cfg;
}

void ExperimentConfig::validate() const {
    if (layers.size() < 2) throw ConfigError("layers needs at least input and output widths");
    for (int w : layers) {
        if (w <= 0) throw ConfigError("layer widths must be positive");
    }
    if (train_limit < 0 || test_limit < 0) throw ConfigError("limits must be >= 0");
    pretrain.validate();
    train.validate();
    hyper.validate();
    merge.validate();
    if (components < 1 || components > 4096) throw ConfigError("components must be in [1, 4096]");
    if (!(pi0 > 0.0 && pi0 < 1.0)) throw ConfigError("pi0 must lie in (0,1)");
    if (p_fc < 1 || p_fc > 16 || p_conv < 1 || p_conv > 16) throw ConfigError("p_fc/p_conv must be in [1,16]");
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    for (const auto& [name, field] : fields()) out += name + " = " + field.get(*this) + "\n";
    return out;
}

}  // namespace sws
