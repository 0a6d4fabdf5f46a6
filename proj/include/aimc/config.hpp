#ifndef AIMC_CONFIG_HPP
#define AIMC_CONFIG_HPP

#include <aimc/analysis.hpp>
#include <aimc/hwa.hpp>
#include <aimc/random.hpp>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aimc {

/// Invalid configuration; `key()` names the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key))
    {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

struct HwaExperiment {
    std::string task = "digits";  ///< digits, digits-wide or spirals
    int hidden = 16;
    int seeds = 10;
    double test_fraction = 0.25;
    TrainRecipe fp_recipe{40, 32, 0.05, 0.9, 0.0, 0.05, 0.01, 1e-3};
    TrainRecipe hwa_recipe{20, 32, 0.01, 0.9, 0.0, 0.05, 0.01, 1e-3};
    HwaSchedule schedule;
    bool distill = true;
    DistillSpec distill_spec;
    bool learn_gamma_tilde = true;
    bool learn_kappa = true;
    double direct_clip_sigmas = 2.5;
    int eval_repeats = 10;
    std::vector<double> eval_times{1.0, 3600.0, 86400.0, 31536000.0};
};

struct SensitivitySettings {
    double target = 0.20;
    BoostOptions boost;
};

struct ThresholdSettings {
    double lo = 1.0;
    double hi = 1000.0;
    int points = 13;
    double level = 0.99;
};

/// Every experiment setting. Defaults are the standard PCM model.
struct RunConfig {
    MvmProtocol protocol;
    HwaExperiment hwa;
    SensitivitySettings sensitivity;
    ThresholdSettings threshold;
    std::uint64_t seed = 0;
    int threads = 1;
};

namespace config_detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double to_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out))
        throw ConfigError(key, "expected a finite number, got '" + v + "'");
    return out;
}

inline long long to_int(const std::string& key, const std::string& v)
{
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(to_double(key, trim(item)));
    if (out.empty())
        throw ConfigError(key, "expected a comma-separated list");
    return out;
}

inline std::string list_str(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k)
        s += (k ? "," : "") + fmt(v[k]);
    return s;
}

struct Key {
    std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename Get>
Key real(Get g)
{
    return {[g](RunConfig& c, const std::string& k, const std::string& v) { g(c) = to_double(k, v); },
            [g](const RunConfig& c) { return fmt(g(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Key integer(Get g)
{
    return {[g](RunConfig& c, const std::string& k, const std::string& v) {
                using T = std::remove_reference_t<decltype(g(c))>;
                g(c) = static_cast<T>(to_int(k, v));
            },
            [g](const RunConfig& c) { return std::to_string(g(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Key boolean(Get g)
{
    return {[g](RunConfig& c, const std::string& k, const std::string& v) { g(c) = to_bool(k, v); },
            [g](const RunConfig& c) { return std::string(g(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

inline const std::map<std::string, Key>& keys()
{
    static const std::map<std::string, Key> table = [] {
        std::map<std::string, Key> t;
        // forward: tile periphery and analog MVM
        t["forward.inp_res"] = integer([](RunConfig& c) -> int& { return c.protocol.tile.dac_bits; });
        t["forward.out_res"] = integer([](RunConfig& c) -> int& { return c.protocol.tile.adc_bits; });
        t["forward.inp_quantize"] = boolean([](RunConfig& c) -> bool& { return c.protocol.tile.dac_enabled; });
        t["forward.out_quantize"] = boolean([](RunConfig& c) -> bool& { return c.protocol.tile.adc_enabled; });
        t["forward.out_noise"] = real([](RunConfig& c) -> double& { return c.protocol.tile.out_noise; });
        t["forward.out_bound"] = real([](RunConfig& c) -> double& { return c.protocol.tile.out_bound; });
        t["forward.w_noise"] = real([](RunConfig& c) -> double& { return c.protocol.tile.w_noise; });
        t["forward.ir_drop"] = real([](RunConfig& c) -> double& { return c.protocol.tile.ir_drop_scale; });
        t["forward.ir_drop_g_ratio"] = {
            [](RunConfig& c, const std::string& k, const std::string& v) {
                const double r = to_double(k, v);
                if (!(r > 0.0))
                    throw ConfigError(k, "must be positive");
                c.protocol.tile.ir_gamma = 1.0 / r;
            },
            [](const RunConfig& c) { return fmt(1.0 / c.protocol.tile.ir_gamma); }};
        t["forward.ir_drop_mode"] = {
            [](RunConfig& c, const std::string& k, const std::string& v) {
                if (v == "approximate")
                    c.protocol.tile.ir_drop_mode = IrDropMode::approximate;
                else if (v == "exact")
                    c.protocol.tile.ir_drop_mode = IrDropMode::exact;
                else
                    throw ConfigError(k, "expected approximate or exact");
            },
            [](const RunConfig& c) {
                return std::string(c.protocol.tile.ir_drop_mode == IrDropMode::exact ? "exact" : "approximate");
            }};
        t["forward.s_shape_mu"] = real([](RunConfig& c) -> double& { return c.protocol.tile.s_shape_mu; });
        t["forward.s_shape_sigma"] = real([](RunConfig& c) -> double& { return c.protocol.tile.s_shape_sigma; });
        t["forward.polarity_sigma"] = real([](RunConfig& c) -> double& { return c.protocol.tile.polarity_sigma; });
        t["forward.v_read"] = real([](RunConfig& c) -> double& { return c.protocol.tile.v_read; });
        t["forward.drift_comp_max_factor"] =
            real([](RunConfig& c) -> double& { return c.protocol.tile.drift_comp_max_factor; });
        t["mapping.max_input_size"] = integer([](RunConfig& c) -> int& { return c.protocol.tile.max_rows; });
        t["mapping.max_output_size"] = integer([](RunConfig& c) -> int& { return c.protocol.tile.max_cols; });

        // noise_model: PCM statistics
        t["noise_model.g_max"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.g_max; });
        t["noise_model.g_min"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.g_min; });
        t["noise_model.prog_c0"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.prog_c0; });
        t["noise_model.prog_c1"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.prog_c1; });
        t["noise_model.prog_c2"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.prog_c2; });
        t["noise_model.t0"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.t0; });
        t["noise_model.t_read"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.t_read; });
        t["noise_model.drift_mu_a"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.mu_nu_fit.a; });
        t["noise_model.drift_mu_b"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.mu_nu_fit.b; });
        t["noise_model.drift_mu_min"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.mu_nu_fit.y_min; });
        t["noise_model.drift_mu_max"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.mu_nu_fit.y_max; });
        t["noise_model.drift_sigma_a"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.sigma_nu_fit.a; });
        t["noise_model.drift_sigma_b"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.sigma_nu_fit.b; });
        t["noise_model.drift_sigma_min"] =
            real([](RunConfig& c) -> double& { return c.protocol.pcm.sigma_nu_fit.y_min; });
        t["noise_model.drift_sigma_max"] =
            real([](RunConfig& c) -> double& { return c.protocol.pcm.sigma_nu_fit.y_max; });
        t["noise_model.read_noise_c1"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.readnoise_c1; });
        t["noise_model.read_noise_c2"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.readnoise_c2; });
        t["noise_model.read_noise_c3"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.readnoise_c3; });
        t["noise_model.prog_noise_scale"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.prog_noise_scale; });
        t["noise_model.drift_scale"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.drift_scale; });
        t["noise_model.read_noise_scale"] = real([](RunConfig& c) -> double& { return c.protocol.pcm.read_noise_scale; });

        // faults: device yield
        t["faults.stuck_reset"] = real([](RunConfig& c) -> double& { return c.protocol.faults.frac_stuck_reset; });
        t["faults.stuck_set"] = real([](RunConfig& c) -> double& { return c.protocol.faults.frac_stuck_set; });
        t["faults.stuck_random"] = real([](RunConfig& c) -> double& { return c.protocol.faults.frac_stuck_random; });

        // protocol: standard MVM error experiment
        t["protocol.rows"] = integer([](RunConfig& c) -> Eigen::Index& { return c.protocol.rows; });
        t["protocol.cols"] = integer([](RunConfig& c) -> Eigen::Index& { return c.protocol.cols; });
        t["protocol.weight_std"] = real([](RunConfig& c) -> double& { return c.protocol.weight_std; });
        t["protocol.n_inputs"] = integer([](RunConfig& c) -> Eigen::Index& { return c.protocol.n_inputs; });
        t["protocol.n_realizations"] = integer([](RunConfig& c) -> Eigen::Index& { return c.protocol.n_realizations; });
        t["protocol.t_eval"] = real([](RunConfig& c) -> double& { return c.protocol.t_eval; });
        t["protocol.drift_compensation"] = boolean([](RunConfig& c) -> bool& { return c.protocol.drift_compensation; });
        t["protocol.scale_mode"] = {
            [](RunConfig& c, const std::string& k, const std::string& v) {
                if (v == "per_tile")
                    c.protocol.scale_mode = ScaleMode::per_tile;
                else if (v == "per_column")
                    c.protocol.scale_mode = ScaleMode::per_column;
                else
                    throw ConfigError(k, "expected per_tile or per_column");
            },
            [](const RunConfig& c) {
                return std::string(c.protocol.scale_mode == ScaleMode::per_tile ? "per_tile" : "per_column");
            }};

        // hwa: desk-scale training experiment
        t["hwa.task"] = {
            [](RunConfig& c, const std::string& k, const std::string& v) {
                if (v != "digits" && v != "digits-wide" && v != "spirals")
                    throw ConfigError(k, "expected digits, digits-wide or spirals");
                c.hwa.task = v;
            },
            [](const RunConfig& c) { return c.hwa.task; }};
        t["hwa.hidden"] = integer([](RunConfig& c) -> int& { return c.hwa.hidden; });
        t["hwa.seeds"] = integer([](RunConfig& c) -> int& { return c.hwa.seeds; });
        t["hwa.test_fraction"] = real([](RunConfig& c) -> double& { return c.hwa.test_fraction; });
        t["hwa.fp_epochs"] = integer([](RunConfig& c) -> int& { return c.hwa.fp_recipe.epochs; });
        t["hwa.fp_lr"] = real([](RunConfig& c) -> double& { return c.hwa.fp_recipe.lr; });
        t["hwa.epochs"] = integer([](RunConfig& c) -> int& { return c.hwa.hwa_recipe.epochs; });
        t["hwa.batch_size"] = {
            [](RunConfig& c, const std::string& k, const std::string& v) {
                c.hwa.hwa_recipe.batch_size = c.hwa.fp_recipe.batch_size = static_cast<int>(to_int(k, v));
            },
            [](const RunConfig& c) { return std::to_string(c.hwa.hwa_recipe.batch_size); }};
        t["hwa.lr"] = real([](RunConfig& c) -> double& { return c.hwa.hwa_recipe.lr; });
        t["hwa.momentum"] = {
            [](RunConfig& c, const std::string& k, const std::string& v) {
                c.hwa.hwa_recipe.momentum = c.hwa.fp_recipe.momentum = to_double(k, v);
            },
            [](const RunConfig& c) { return fmt(c.hwa.hwa_recipe.momentum); }};
        t["hwa.lr_scale"] = real([](RunConfig& c) -> double& { return c.hwa.hwa_recipe.lr_scale; });
        t["hwa.lr_alpha"] = real([](RunConfig& c) -> double& { return c.hwa.hwa_recipe.lr_alpha; });
        t["hwa.kappa_decay"] = real([](RunConfig& c) -> double& { return c.hwa.hwa_recipe.kappa_decay; });
        t["hwa.noise_ramp_epochs"] = integer([](RunConfig& c) -> int& { return c.hwa.schedule.noise_ramp_epochs; });
        t["hwa.prog_noise_scale_final"] =
            real([](RunConfig& c) -> double& { return c.hwa.schedule.prog_noise_scale_final; });
        t["hwa.remap_every"] = integer([](RunConfig& c) -> int& { return c.hwa.schedule.remap_every; });
        t["hwa.input_range_decay"] = real([](RunConfig& c) -> double& { return c.hwa.schedule.input_range_decay; });
        t["hwa.input_range_init_batches"] =
            integer([](RunConfig& c) -> int& { return c.hwa.schedule.input_range_init_batches; });
        t["hwa.input_range_cap"] = real([](RunConfig& c) -> double& { return c.hwa.schedule.input_range_cap; });
        t["hwa.noise_refresh_per_batch"] =
            integer([](RunConfig& c) -> int& { return c.hwa.schedule.noise_refresh_per_batch; });
        t["hwa.drop_connect"] = real([](RunConfig& c) -> double& { return c.hwa.schedule.drop_connect; });
        t["hwa.dynamic_management"] = boolean([](RunConfig& c) -> bool& { return c.hwa.schedule.dynamic_management; });
        t["hwa.distill"] = boolean([](RunConfig& c) -> bool& { return c.hwa.distill; });
        t["hwa.distill_temperature"] = real([](RunConfig& c) -> double& { return c.hwa.distill_spec.temperature; });
        t["hwa.distill_mixture"] = real([](RunConfig& c) -> double& { return c.hwa.distill_spec.mixture; });
        t["hwa.learn_gamma_tilde"] = boolean([](RunConfig& c) -> bool& { return c.hwa.learn_gamma_tilde; });
        t["hwa.learn_kappa"] = boolean([](RunConfig& c) -> bool& { return c.hwa.learn_kappa; });
        t["hwa.direct_clip_sigmas"] = real([](RunConfig& c) -> double& { return c.hwa.direct_clip_sigmas; });
        t["hwa.eval_repeats"] = integer([](RunConfig& c) -> int& { return c.hwa.eval_repeats; });
        t["hwa.eval_times"] = {
            [](RunConfig& c, const std::string& k, const std::string& v) {
                c.hwa.eval_times = to_list(k, v);
                for (const double x : c.hwa.eval_times)
                    if (x < 0.0)
                        throw ConfigError(k, "times must be non-negative");
            },
            [](const RunConfig& c) { return list_str(c.hwa.eval_times); }};

        // sensitivity and threshold scans
        t["sensitivity.target"] = real([](RunConfig& c) -> double& { return c.sensitivity.target; });
        t["sensitivity.tolerance"] = real([](RunConfig& c) -> double& { return c.sensitivity.boost.tolerance; });
        t["sensitivity.max_scale"] = real([](RunConfig& c) -> double& { return c.sensitivity.boost.max_scale; });
        t["threshold.lo"] = real([](RunConfig& c) -> double& { return c.threshold.lo; });
        t["threshold.hi"] = real([](RunConfig& c) -> double& { return c.threshold.hi; });
        t["threshold.points"] = integer([](RunConfig& c) -> int& { return c.threshold.points; });
        t["threshold.level"] = real([](RunConfig& c) -> double& { return c.threshold.level; });

        t["run.seed"] = {
            [](RunConfig& c, const std::string& k, const std::string& v) {
                std::uint64_t out = 0;
                const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
                if (ec != std::errc() || ptr != v.data() + v.size())
                    throw ConfigError(k, "expected an unsigned 64-bit integer");
                c.seed = out;
            },
            [](const RunConfig& c) { return std::to_string(c.seed); }};
        return t;
    }();
    return table;
}

} // namespace config_detail

/// Names of all accepted keys, "section.key".
inline std::vector<std::string> config_keys()
{
    std::vector<std::string> out;
    for (const auto& [k, v] : config_detail::keys())
        out.push_back(k);
    return out;
}

/// Sets one "section.key" entry from its text value.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value)
{
    const auto& table = config_detail::keys();
    const auto it = table.find(key);
    if (it == table.end())
        throw ConfigError(key, "unknown configuration key");
    it->second.set(c, key, config_detail::trim(value));
}

/// Range checks that need the whole configuration.
inline void validate_config(const RunConfig& c)
{
    auto wrap = [](const char* section, auto&& f) {
        try {
            f();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(section, e.what());
        }
    };
    wrap("forward", [&] { c.protocol.tile.validate(); });
    wrap("noise_model", [&] { c.protocol.pcm.validate(); });
    wrap("faults", [&] { c.protocol.faults.validate(); });
    wrap("hwa", [&] {
        c.hwa.fp_recipe.validate();
        c.hwa.hwa_recipe.validate();
        c.hwa.schedule.validate();
        c.hwa.distill_spec.validate();
    });
    if (c.protocol.rows < 1 || c.protocol.cols < 1 || c.protocol.n_inputs < 1 || c.protocol.n_realizations < 1)
        throw ConfigError("protocol", "sizes and counts must be positive");
    if (!(c.protocol.weight_std > 0.0))
        throw ConfigError("protocol.weight_std", "must be positive");
    if (c.protocol.t_eval < 0.0)
        throw ConfigError("protocol.t_eval", "must be non-negative");
    if (c.hwa.hidden < 1 || c.hwa.seeds < 1 || c.hwa.eval_repeats < 1)
        throw ConfigError("hwa", "hidden, seeds and eval_repeats must be positive");
    if (!(c.hwa.test_fraction > 0.0 && c.hwa.test_fraction < 1.0))
        throw ConfigError("hwa.test_fraction", "must be in (0, 1)");
    if (!(c.hwa.direct_clip_sigmas > 0.0))
        throw ConfigError("hwa.direct_clip_sigmas", "must be positive");
    if (!(c.sensitivity.target > 0.0) || !(c.sensitivity.boost.tolerance > 0.0) ||
        !(c.sensitivity.boost.max_scale > 1.0))
        throw ConfigError("sensitivity", "target and tolerance must be positive, max_scale above 1");
    if (!(c.threshold.lo > 0.0) || !(c.threshold.hi >= c.threshold.lo) || c.threshold.points < 2)
        throw ConfigError("threshold", "need 0 < lo <= hi and at least 2 points");
}

/// Parses "key = value" lines grouped under [section] headers. '#' and ';'
/// start comments. Unknown sections or keys are errors.
inline void load_config(std::istream& in, RunConfig& c)
{
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto cut = line.find_first_of("#;");
        line = config_detail::trim(cut == std::string::npos ? line : line.substr(0, cut));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno), "malformed section header");
            section = config_detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        const std::string key = config_detail::trim(line.substr(0, eq));
        if (section.empty())
            throw ConfigError(key, "key outside of a [section]");
        set_config_value(c, section + "." + key, line.substr(eq + 1));
    }
}

inline void load_config_file(const std::string& path, RunConfig& c)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path, "cannot open config file");
    load_config(in, c);
}

/// Every effective setting in config-file form, one [section] per group.
/// The output loads back into an identical RunConfig. The thread count is
/// not a setting: it never changes results.
inline std::string dump_config(const RunConfig& c)
{
    std::string out;
    std::string section;
    for (const auto& [k, key] : config_detail::keys()) {
        const auto dot = k.find('.');
        const std::string s = k.substr(0, dot);
        if (s != section) {
            out += (section.empty() ? "[" : "\n[") + s + "]\n";
            section = s;
        }
        out += k.substr(dot + 1) + " = " + key.get(c) + "\n";
    }
    return out;
}

/// FNV-1a of dump_config() as 16 hex digits.
inline std::string config_hash(const RunConfig& c)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(dump_config(c))));
    return buf;
}

} // namespace aimc

#endif // AIMC_CONFIG_HPP
