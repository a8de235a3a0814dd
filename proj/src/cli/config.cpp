#include "mfd/cli/config.hpp"

#include "mfd/error.hpp"
#include "mfd/util/io.hpp"
#include "mfd/util/parallel.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

namespace mfd {

EdmConfig DiffusionSettings::edm(double sigma_data, int steps) const {
    EdmConfig c = EdmConfig::scaled(sigma_data, sigma_min_factor, sigma_max_train_factor, sigma_max_sample_factor);
    c.rho = rho;
    c.steps = steps;
    c.s_churn = s_churn;
    c.s_min = s_min;
    c.s_max = s_max;
    c.s_noise = s_noise;
    c.validate();
    return c;
}

namespace {

using Setter = std::function<void(RunConfig&, const std::string& value, const std::string& where)>;

double to_double(const std::string& v, const std::string& where) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    return parse_double(v, where);
}

int to_int(const std::string& v, const std::string& where) {
    const long long x = parse_int(v, where);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw ParseError(where + ": integer out of range");
    }
    return static_cast<int>(x);
}

std::uint64_t to_seed(const std::string& v, const std::string& where) {
    const long long x = parse_int(v, where);
    if (x < 0) throw ParseError(where + ": seed must be non-negative");
    return static_cast<std::uint64_t>(x);
}

/// "x y r; x y r" with coordinates in units of the half-width.
std::vector<Disk> to_disks(const std::string& v, const std::string& where) {
    std::vector<Disk> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ';')) {
        std::istringstream is(item);
        std::string a, b, c, extra;
        if (!(is >> a)) continue;
        if (!(is >> b >> c) || (is >> extra)) throw ParseError(where + ": each disk needs 'x y radius'");
        out.push_back({{parse_double(a, where), parse_double(b, where)}, parse_double(c, where)});
    }
    return out;
}

#define MFD_D(field) [](RunConfig& c, const std::string& v, const std::string& w) { c.field = to_double(v, w); }
#define MFD_I(field) [](RunConfig& c, const std::string& v, const std::string& w) { c.field = to_int(v, w); }

const std::map<std::string, std::map<std::string, Setter>>& schema() {
    static const std::map<std::string, std::map<std::string, Setter>> s = {
        {"data",
         {{"train_meshes", MFD_I(data.train_meshes)},
          {"test_meshes", MFD_I(data.test_meshes)},
          {"angles", MFD_I(data.angles)},
          {"target_nodes", MFD_I(data.target_nodes)},
          {"half_width", MFD_D(data.half_width)},
          {"u_inf", MFD_D(data.u_inf)},
          {"image_rounds", MFD_I(data.image_rounds)},
          {"disks_min", MFD_I(data.obstacles.disks_min)},
          {"disks_max", MFD_I(data.obstacles.disks_max)},
          {"radius_min", MFD_D(data.obstacles.radius_min)},
          {"radius_max", MFD_D(data.obstacles.radius_max)},
          {"center_extent", MFD_D(data.obstacles.center_extent)},
          {"max_boundary_disturbance", MFD_D(data.obstacles.max_boundary_disturbance)},
          {"wall_ratio", MFD_D(data.grading.wall_ratio)},
          {"grading_radii", MFD_D(data.grading.grading_radii)}}},
        {"graph", {{"target_ratio", MFD_D(target_ratio)}}},
        {"model",
         {{"mode", [](RunConfig& c, const std::string& v, const std::string&) { c.model.mode = parse_mode(v); }},
          {"hidden", MFD_I(model.hidden)},
          {"layers_o2o", MFD_I(model.layers_o2o)},
          {"layers_o2r", MFD_I(model.layers_o2r)},
          {"layers_r2r", MFD_I(model.layers_r2r)},
          {"layers_r2o", MFD_I(model.layers_r2o)},
          {"single_scale_layers", MFD_I(model.single_scale_layers)},
          {"fourier_bands", MFD_I(model.fourier_bands)},
          {"harmonic_orders", MFD_I(model.harmonic_orders)},
          {"init_std", MFD_D(model.init_std)},
          {"precision",
           [](RunConfig& c, const std::string& v, const std::string& w) {
               if (v != "float" && v != "double") throw ConfigError(w + ": precision must be float or double");
               c.double_precision = v == "double";
           }}}},
        {"diffusion",
         {{"rho", MFD_D(diffusion.rho)},
          {"sigma_min_factor", MFD_D(diffusion.sigma_min_factor)},
          {"sigma_max_train_factor", MFD_D(diffusion.sigma_max_train_factor)},
          {"sigma_max_sample_factor", MFD_D(diffusion.sigma_max_sample_factor)},
          {"sigma_data",
           [](RunConfig& c, const std::string& v, const std::string& w) {
               if (v == "auto") {
                   c.diffusion.sigma_data.reset();
               } else {
                   c.diffusion.sigma_data = to_double(v, w);
               }
           }},
          {"s_churn", MFD_D(diffusion.s_churn)},
          {"s_min", MFD_D(diffusion.s_min)},
          {"s_max", MFD_D(diffusion.s_max)},
          {"s_noise", MFD_D(diffusion.s_noise)}}},
        {"train",
         {{"steps", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.steps = parse_int(v, w); }},
          {"batch", MFD_I(train.batch)},
          {"lr", MFD_D(train.optimizer.lr)},
          {"lr_floor", MFD_D(train.lr_floor)},
          {"beta1", MFD_D(train.optimizer.beta1)},
          {"beta2", MFD_D(train.optimizer.beta2)},
          {"eps", MFD_D(train.optimizer.eps)},
          {"weight_decay", MFD_D(train.optimizer.weight_decay)},
          {"clip_norm", MFD_D(train.optimizer.clip_norm)},
          {"log_every", MFD_I(train.log_every)},
          {"checkpoint_every",
           [](RunConfig& c, const std::string& v, const std::string& w) { c.train.checkpoint_every = parse_int(v, w); }},
          {"divergence_threshold", MFD_D(train.divergence_threshold)}}},
        {"sample",
         {{"steps", MFD_I(sample.steps)},
          {"angles", [](RunConfig& c, const std::string& v, const std::string&) { c.sample.angles = parse_angle_list(v); }},
          {"sweep_steps",
           [](RunConfig& c, const std::string& v, const std::string& w) { c.sweep_steps = parse_int_list(v, w); }}}},
        {"eval",
         {{"raster_resolution", MFD_I(eval.raster_resolution)},
          {"ssim_window", MFD_I(eval.ssim.window)},
          {"ssim_sigma", MFD_D(eval.ssim.sigma)},
          {"ssim_k1", MFD_D(eval.ssim.k1)},
          {"ssim_k2", MFD_D(eval.ssim.k2)},
          {"s2_bins", MFD_I(eval.s2_bins)},
          {"s2_pairs",
           [](RunConfig& c, const std::string& v, const std::string& w) {
               const long long n = parse_int(v, w);
               if (n < 1) throw ConfigError(w + ": must be >= 1");
               c.eval.s2_pairs = static_cast<std::size_t>(n);
           }},
          {"kde_points", MFD_I(eval.kde_points)},
          {"split", [](RunConfig& c, const std::string& v, const std::string&) { c.eval.split = v; }}}},
    };
    return s;
}

#undef MFD_D
#undef MFD_I

void validate(const RunConfig& c) {
    c.data.validate();
    if (!(c.target_ratio >= 1.0)) throw ConfigError("graph.target_ratio must be >= 1");
    c.model.validate();
    if (c.diffusion.sigma_data && !(*c.diffusion.sigma_data > 0.0)) {
        throw ConfigError("diffusion.sigma_data must be positive or 'auto'");
    }
    c.diffusion.edm(c.diffusion.sigma_data.value_or(0.5), c.sample.steps);
    if (c.train.steps < 0) throw ConfigError("train.steps must be >= 0");
    if (c.train.batch < 1) throw ConfigError("train.batch must be >= 1");
    if (!(c.train.optimizer.lr > 0.0)) throw ConfigError("train.lr must be positive");
    if (c.train.log_every < 1) throw ConfigError("train.log_every must be >= 1");
    if (c.sample.steps < 1) throw ConfigError("sample.steps must be >= 1");
    if (c.eval.raster_resolution < 32) throw ConfigError("eval.raster_resolution must be >= 32");
    if (c.eval.s2_bins < 1) throw ConfigError("eval.s2_bins must be >= 1");
    if (c.sweep_steps.empty()) throw ConfigError("sample.sweep_steps must not be empty");
    for (int n : c.sweep_steps) {
        if (n < 1) throw ConfigError("sample.sweep_steps entries must be >= 1");
    }
}

void apply_key(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& v,
               const std::string& source, bool& have_seed) {
    if (section.empty()) {
        if (key == "workers") {
            cfg.workers = to_int(v, source + ": workers");
            if (cfg.workers < 0) throw ConfigError(source + ": workers must be >= 0");
            return;
        }
        if (key != "seed") throw ConfigError(source + ": unknown top-level key '" + key + "'");
        cfg.seed = to_seed(v, source + ": seed");
        have_seed = true;
        return;
    }
    const auto& sections = schema();
    const auto sec = sections.find(section);
    if (sec == sections.end()) throw ConfigError(source + ": unknown section [" + section + "]");
    const std::string where = source + ": " + section + "." + key;
    if (section == "data" && key.rfind("obstacles_", 0) == 0) {
        const int idx = to_int(key.substr(10), where);
        ObstacleSet set;
        set.disks = to_disks(v, where);
        cfg.data.fixed_obstacles[idx] = set;
        return;
    }
    const auto setter = sec->second.find(key);
    if (setter == sec->second.end()) throw ConfigError(where + ": unknown key");
    setter->second(cfg, v, where);
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source,
                           const std::optional<std::string>& seed_override, const std::vector<std::string>& overrides) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig cfg;
    cfg.text = text;
    bool have_seed = false;
    for (const auto& [name, node] : tree) {
        if (node.empty()) {
            apply_key(cfg, "", name, node.data(), source, have_seed);
            continue;
        }
        if (!schema().count(name)) throw ConfigError(source + ": unknown section [" + name + "]");
        for (const auto& [key, value] : node) apply_key(cfg, name, key, value.data(), source, have_seed);
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + o + "': expected section.key=value");
        const std::string path = o.substr(0, eq);
        const auto dot = path.find('.');
        const std::string section = dot == std::string::npos ? "" : path.substr(0, dot);
        const std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
        apply_key(cfg, section, key, o.substr(eq + 1), "override", have_seed);
        if (!cfg.text.empty() && cfg.text.back() != '\n') cfg.text += '\n';
        cfg.text += "# override " + o + "\n";
    }
    cfg.hash = fnv1a64(cfg.text);
    if (seed_override) {
        cfg.seed = to_seed(*seed_override, "MFD_SEED");
        have_seed = true;
    }
    if (!have_seed) throw ConfigError(source + ": 'seed' is required at the top level");
    // Fixed layouts are written in units of the half-width.
    for (auto& [idx, set] : cfg.data.fixed_obstacles) {
        set.half_width = cfg.data.half_width;
        for (Disk& d : set.disks) {
            d.center = cfg.data.half_width * d.center;
            d.radius *= cfg.data.half_width;
        }
    }
    cfg.data.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.eval.seed = cfg.seed;
    set_workers(cfg, cfg.workers);
    validate(cfg);
    return cfg;
}

void set_workers(RunConfig& cfg, int workers) {
    if (workers < 0) throw ConfigError("workers must be >= 0");
    cfg.workers = workers == 0 ? default_workers() : workers;
    cfg.data.workers = cfg.workers;
    cfg.eval.workers = cfg.workers;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    const char* env = std::getenv("MFD_SEED");
    std::optional<std::string> override_seed;
    if (env && *env) override_seed = env;
    return parse_run_config(read_file(path), path.string(), override_seed, overrides);
}

void apply_full_scale_preset(RunConfig& cfg) {
    cfg.train.steps = 200000;
    cfg.train.batch = 2;
    if (!cfg.text.empty() && cfg.text.back() != '\n') cfg.text += '\n';
    cfg.text += "# preset full-scale: train.steps=200000 train.batch=2\n";
    cfg.hash = fnv1a64(cfg.text);
}

void stamp_config(const std::filesystem::path& dir, const RunConfig& cfg) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "config.ini", cfg.text);
    write_file_atomic(dir / "config.hash", "fnv1a64 " + hex64(cfg.hash) + "\nseed " + std::to_string(cfg.seed) + "\n");
}

std::vector<double> parse_angle_list(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        std::stringstream ss(spec);
        std::string a, b, c;
        if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c)) {
            throw ParseError("angle range '" + spec + "': expected start:stop:step");
        }
        const double start = parse_double(a, "angle range start"), stop = parse_double(b, "angle range stop"),
                     step = parse_double(c, "angle range step");
        if (!(step > 0.0)) throw ParseError("angle range '" + spec + "': step must be positive");
        for (int k = 0;; ++k) {
            const double v = start + k * step;
            if (v > stop + 1e-9) break;
            out.push_back(v);
        }
        return out;
    }
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(parse_double(item.substr(b, e - b + 1), "angle list '" + spec + "'"));
    }
    if (out.empty()) throw ParseError("angle list '" + spec + "' is empty");
    return out;
}

std::vector<int> parse_int_list(const std::string& spec, const std::string& context) {
    std::vector<int> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(to_int(item.substr(b, e - b + 1), context));
    }
    return out;
}

}  // namespace mfd
