#include "mfd/cli/commands.hpp"

#include "mfd/diffusion/sampler.hpp"
#include "mfd/error.hpp"
#include "mfd/util/io.hpp"
#include "mfd/util/parallel.hpp"
#include "mfd/util/seed.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <numbers>
#include <sstream>

namespace mfd {

namespace {

std::string file_name(const std::string& path) { return std::filesystem::path(path).filename().string(); }
std::string file_stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

double meta_double(const CheckpointMeta& meta, const std::string& key, const std::filesystem::path& path) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw ValidationError(path.string() + ": checkpoint has no '" + key + "' entry");
    return parse_double(it->second, path.string() + ": " + key);
}

int meta_int(const CheckpointMeta& meta, const std::string& key, const std::filesystem::path& path) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw ValidationError(path.string() + ": checkpoint has no '" + key + "' entry");
    return static_cast<int>(parse_int(it->second, path.string() + ": " + key));
}

CheckpointMeta model_meta(const RunConfig& cfg, double sigma_data, double velocity_scale, std::int64_t steps_done) {
    const DenoiserConfig& m = cfg.model;
    return {
        {"sigma_data", format_double(sigma_data)},
        {"velocity_scale", format_double(velocity_scale)},
        {"mode", mode_name(m.mode)},
        {"hidden", std::to_string(m.hidden)},
        {"layers_o2o", std::to_string(m.layers_o2o)},
        {"layers_o2r", std::to_string(m.layers_o2r)},
        {"layers_r2r", std::to_string(m.layers_r2r)},
        {"layers_r2o", std::to_string(m.layers_r2o)},
        {"single_scale_layers", std::to_string(m.single_scale_layers)},
        {"fourier_bands", std::to_string(m.fourier_bands)},
        {"harmonic_orders", std::to_string(m.harmonic_orders)},
        {"target_ratio", format_double(cfg.target_ratio)},
        {"config_hash", hex64(cfg.hash)},
        {"seed", std::to_string(cfg.seed)},
        {"precision", cfg.double_precision ? "double" : "float"},
        {"steps_done", std::to_string(steps_done)},
    };
}

std::vector<FieldData> load_split_fields(const std::filesystem::path& dataset, const DatasetManifest& m,
                                         const std::string& split) {
    std::vector<FieldData> out;
    for (const auto& e : m.split(split)) out.push_back(load_field(dataset / e.field_path));
    return out;
}

Matrix<double> to_matrix(const std::vector<Vec2>& v) {
    Matrix<double> x(static_cast<Eigen::Index>(v.size()), 2);
    for (std::size_t i = 0; i < v.size(); ++i) {
        x(static_cast<Eigen::Index>(i), 0) = v[i].x;
        x(static_cast<Eigen::Index>(i), 1) = v[i].y;
    }
    return x;
}

template <typename T>
TrainResult run_training(const RunConfig& cfg, std::span<const TrainExample> examples, const EdmConfig& edm,
                         double sigma_data, double velocity_scale, const std::filesystem::path& ckpt_path) {
    ParamStore<T> params;
    const Denoiser<T> model(cfg.model, params, derive_seed(cfg.seed, 2));
    CheckpointFn<T> on_ckpt = [&](std::int64_t step, const ParamStore<T>& p) {
        save_checkpoint(ckpt_path, p, model_meta(cfg, sigma_data, velocity_scale, step));
    };
    TrainResult r = train(model, params, examples, edm, cfg.train, on_ckpt);
    save_checkpoint(ckpt_path, params, model_meta(cfg, sigma_data, velocity_scale, r.steps_done));
    return r;
}

struct SampleJob {
    std::size_t mesh = 0;
    std::size_t angle = 0;
};

std::string sample_field_name(const std::string& mesh_name, std::size_t angle_index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%03zu.field", angle_index);
    return "fields/" + file_stem(mesh_name) + buf;
}

void write_timing(const std::filesystem::path& path, const std::vector<SampleTiming>& rows) {
    std::ostringstream os;
    os << "mesh,angle_deg,seconds\n";
    for (const auto& r : rows) os << r.mesh << ',' << format_double(r.angle_deg) << ',' << format_double(r.seconds) << '\n';
    write_file_atomic(path, os.str());
}

std::string fmt_cell(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double all_mean(const MetricsReport& r, const std::string& metric) {
    for (const auto& a : r.aggregates) {
        if (a.label == "ALL") return a.mean[metric_index(metric)];
    }
    throw ValidationError("metrics report has no ALL aggregate");
}

}  // namespace

DatasetManifest cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out) {
    DatasetManifest m = generate_dataset(cfg.data, out);
    stamp_config(out, cfg);
    cmd_build_graphs(cfg, out, out / "graphs");
    return m;
}

GraphStats graph_stats(const std::string& mesh, const MultiscaleGraph& g) {
    GraphStats s;
    s.mesh = mesh;
    s.original_nodes = g.num_original();
    s.reduced_nodes = g.num_reduced();
    s.o2o = g.o2o.size();
    s.o2r = g.o2r.size();
    s.r2r = g.r2r.size();
    s.r2o = g.r2o.size();
    s.o2o_diameter = graph_diameter(g.num_original(), g.o2o);
    s.r2r_diameter = graph_diameter(g.num_reduced(), g.r2r);
    return s;
}

std::string format_graph_stats(const std::vector<GraphStats>& stats) {
    std::ostringstream os;
    os << "mesh,original_nodes,reduced_nodes,o2o_edges,o2r_edges,r2r_edges,r2o_edges,o2o_diameter,r2r_diameter\n";
    for (const auto& s : stats) {
        os << s.mesh << ',' << s.original_nodes << ',' << s.reduced_nodes << ',' << s.o2o << ',' << s.o2r << ','
           << s.r2r << ',' << s.r2o << ',' << s.o2o_diameter << ',' << s.r2r_diameter << '\n';
    }
    return os.str();
}

std::vector<GraphStats> cmd_build_graphs(const RunConfig& cfg, const std::filesystem::path& dataset,
                                         const std::filesystem::path& out) {
    const DatasetManifest m = load_manifest(dataset);
    const std::vector<std::string> meshes = m.meshes();
    std::vector<GraphStats> stats(meshes.size());
    std::filesystem::create_directories(out);
    parallel_for(meshes.size(), cfg.workers, [&](std::size_t k) {
        const MultiscaleGraph g = build_multiscale_graph(load_mesh(dataset / meshes[k]), cfg.target_ratio);
        save_graph(out / (file_stem(meshes[k]) + ".graph"), g);
        stats[k] = graph_stats(file_name(meshes[k]), g);
    });
    write_file_atomic(out / "graphs.csv", format_graph_stats(stats));
    stamp_config(out, cfg);
    return stats;
}

double measure_sigma_data(const std::vector<FieldData>& fields) {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (const auto& f : fields) {
        for (const Vec2& v : f.velocity) {
            sum += v.x + v.y;
            sum_sq += v.x * v.x + v.y * v.y;
            n += 2;
        }
    }
    if (n == 0) throw ValidationError("sigma_data: no training values");
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
    if (!(var > 0.0)) throw NumericError("sigma_data: training targets have zero variance");
    return std::sqrt(var);
}

TrainOutcome cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset, const std::filesystem::path& out) {
    const DatasetManifest m = load_manifest(dataset);
    const std::vector<ManifestEntry> entries = m.split("train");
    if (entries.empty()) throw ValidationError(dataset.string() + ": manifest has no train entries");
    const std::vector<FieldData> fields = load_split_fields(dataset, m, "train");

    std::map<std::string, std::size_t> graph_index;
    std::deque<MultiscaleGraph> graphs;
    for (const auto& e : entries) {
        if (graph_index.count(e.mesh_path)) continue;
        graph_index[e.mesh_path] = graphs.size();
        graphs.push_back(build_multiscale_graph(load_mesh(dataset / e.mesh_path), cfg.target_ratio));
    }
    std::vector<TrainExample> examples;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const MultiscaleGraph& g = graphs[graph_index.at(entries[i].mesh_path)];
        if (fields[i].velocity.size() != g.num_original()) {
            throw ValidationError(entries[i].field_path + ": field size does not match its mesh");
        }
        examples.push_back({&g, fields[i].angle_deg * std::numbers::pi / 180.0, to_matrix(fields[i].velocity)});
    }

    TrainOutcome outcome;
    outcome.sigma_data = cfg.diffusion.sigma_data.value_or(measure_sigma_data(fields));
    const EdmConfig edm = cfg.diffusion.edm(outcome.sigma_data, cfg.sample.steps);
    stamp_config(out, cfg);
    outcome.checkpoint = out / kCheckpointName;
    outcome.result = cfg.double_precision
                         ? run_training<double>(cfg, examples, edm, outcome.sigma_data, m.velocity_scale, outcome.checkpoint)
                         : run_training<float>(cfg, examples, edm, outcome.sigma_data, m.velocity_scale, outcome.checkpoint);
    write_file_atomic(out / "loss.csv", format_loss_csv(outcome.result.trace));
    if (outcome.result.diverged) throw NumericError("train: " + outcome.result.message);
    return outcome;
}

LoadedModel load_model(const std::filesystem::path& checkpoint, const RunConfig& cfg) {
    LoadedModel lm;
    lm.meta = load_checkpoint_meta(checkpoint);
    const auto& meta = lm.meta;
    const auto mode = meta.find("mode");
    if (mode == meta.end()) throw ValidationError(checkpoint.string() + ": checkpoint has no 'mode' entry");
    lm.model = cfg.model;
    lm.model.mode = parse_mode(mode->second);
    lm.model.hidden = meta_int(meta, "hidden", checkpoint);
    lm.model.layers_o2o = meta_int(meta, "layers_o2o", checkpoint);
    lm.model.layers_o2r = meta_int(meta, "layers_o2r", checkpoint);
    lm.model.layers_r2r = meta_int(meta, "layers_r2r", checkpoint);
    lm.model.layers_r2o = meta_int(meta, "layers_r2o", checkpoint);
    lm.model.single_scale_layers = meta_int(meta, "single_scale_layers", checkpoint);
    lm.model.fourier_bands = meta_int(meta, "fourier_bands", checkpoint);
    lm.model.harmonic_orders = meta_int(meta, "harmonic_orders", checkpoint);
    lm.model.validate();
    lm.sigma_data = meta_double(meta, "sigma_data", checkpoint);
    lm.velocity_scale = meta_double(meta, "velocity_scale", checkpoint);
    lm.target_ratio = meta_double(meta, "target_ratio", checkpoint);
    if (lm.target_ratio != cfg.target_ratio) {
        throw ConfigError(checkpoint.string() + ": incompatible graph.target_ratio (checkpoint " +
                          format_double(lm.target_ratio) + ", config " + format_double(cfg.target_ratio) + ")");
    }

    const Denoiser<double> probe(lm.model, lm.params, 0);
    const ParamStore<double> stored = load_checkpoint<double>(checkpoint);
    if (stored.size() != lm.params.size()) {
        throw ConfigError(checkpoint.string() + ": checkpoint holds " + std::to_string(stored.size()) +
                          " parameters, the recorded architecture needs " + std::to_string(lm.params.size()));
    }
    for (std::size_t i = 0; i < lm.params.size(); ++i) {
        const std::string& name = lm.params.name(i);
        if (!stored.contains(name)) throw ConfigError(checkpoint.string() + ": missing parameter " + name);
        const Matrix<double>& v = stored.value(stored.index(name));
        if (v.rows() != lm.params.value(i).rows() || v.cols() != lm.params.value(i).cols()) {
            throw ConfigError(checkpoint.string() + ": parameter " + name + " has the wrong shape");
        }
        lm.params.value(i) = v;
    }
    return lm;
}

std::uint64_t sample_seed(std::uint64_t seed, const std::string& mesh_name, double angle_deg) {
    const auto milli = static_cast<std::uint64_t>(std::llround(angle_deg * 1000.0));
    return derive_seed(derive_seed(seed, fnv1a64(file_name(mesh_name))), milli);
}

std::vector<SampleTiming> cmd_sample(const RunConfig& cfg, const SampleRequest& req, const std::filesystem::path& out) {
    LoadedModel lm = load_model(req.checkpoint, cfg);

    std::vector<std::filesystem::path> mesh_paths = req.meshes;
    if (req.dataset) {
        const DatasetManifest m = load_manifest(*req.dataset);
        if (m.velocity_scale != lm.velocity_scale) {
            throw ConfigError("incompatible velocity_scale: checkpoint " + format_double(lm.velocity_scale) +
                              ", dataset " + format_double(m.velocity_scale));
        }
        for (const auto& p : m.meshes(req.split)) mesh_paths.push_back(*req.dataset / p);
    }
    if (mesh_paths.empty()) throw ConfigError("sample: no meshes selected");
    const std::vector<double> angles =
        !req.angles.empty() ? req.angles : (!cfg.sample.angles.empty() ? cfg.sample.angles : angle_grid(cfg.data.angles));
    const int steps = req.steps.value_or(cfg.sample.steps);
    const EdmConfig edm = cfg.diffusion.edm(lm.sigma_data, steps);

    std::vector<std::string> names;
    std::deque<MultiscaleGraph> graphs;
    for (const auto& p : mesh_paths) {
        names.push_back(p.filename().string());
        graphs.push_back(build_multiscale_graph(load_mesh(p), lm.target_ratio));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (names[i] == names[j]) throw ConfigError("sample: two meshes share the file name " + names[i]);
        }
    }

    ParamStore<double> store;
    const Denoiser<double> model(lm.model, store, 0);
    store.assign_from(lm.params);

    std::filesystem::create_directories(out / "meshes");
    std::filesystem::create_directories(out / "fields");
    for (std::size_t k = 0; k < graphs.size(); ++k) save_mesh(out / "meshes" / names[k], graphs[k].original);

    std::vector<SampleJob> jobs;
    for (std::size_t k = 0; k < graphs.size(); ++k) {
        for (std::size_t a = 0; a < angles.size(); ++a) jobs.push_back({k, a});
    }
    std::vector<SampleTiming> timing(jobs.size());
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
        const SampleJob& j = jobs[i];
        const MultiscaleGraph& g = graphs[j.mesh];
        const double angle = angles[j.angle];
        const auto t0 = std::chrono::steady_clock::now();
        const GraphContext<double> ctx(g, angle * std::numbers::pi / 180.0);
        std::mt19937_64 rng(sample_seed(cfg.seed, names[j.mesh], angle));
        const DenoiseFn fn = [&](const Matrix<double>& x, double sigma) {
            return model.denoise_value(ctx, x, sigma, lm.sigma_data);
        };
        const Matrix<double> x = edm_sample(fn, static_cast<Eigen::Index>(g.num_original()), 2, edm, steps, rng);
        const auto t1 = std::chrono::steady_clock::now();
        FieldData f;
        f.angle_deg = angle;
        f.velocity.resize(g.num_original());
        for (Eigen::Index r = 0; r < x.rows(); ++r) f.velocity[static_cast<std::size_t>(r)] = {x(r, 0), x(r, 1)};
        save_field(out / sample_field_name(names[j.mesh], j.angle), f);
        timing[i] = {names[j.mesh], angle, std::chrono::duration<double>(t1 - t0).count()};
    });

    DatasetManifest manifest;
    manifest.seed = cfg.seed;
    manifest.velocity_scale = lm.velocity_scale;
    for (const auto& j : jobs) {
        manifest.entries.push_back({"sample", "meshes/" + names[j.mesh], angles[j.angle],
                                    sample_field_name(names[j.mesh], j.angle)});
    }
    save_manifest(out, manifest);
    write_timing(out / "timing.csv", timing);
    stamp_config(out, cfg);
    return timing;
}

void write_uniform_baseline(const std::filesystem::path& dataset, const std::string& split,
                            const std::filesystem::path& out) {
    const DatasetManifest m = load_manifest(dataset);
    const std::vector<ManifestEntry> entries = m.split(split);
    if (entries.empty()) throw ValidationError(dataset.string() + ": no entries in split '" + split + "'");
    std::filesystem::create_directories(out / "meshes");
    std::filesystem::create_directories(out / "fields");
    std::map<std::string, Mesh> meshes;
    std::map<std::string, int> angle_counter;
    DatasetManifest baseline;
    baseline.seed = m.seed;
    baseline.velocity_scale = m.velocity_scale;
    for (const auto& e : entries) {
        const std::string name = file_name(e.mesh_path);
        if (!meshes.count(name)) {
            meshes.emplace(name, load_mesh(dataset / e.mesh_path));
            save_mesh(out / "meshes" / name, meshes.at(name));
        }
        const double phi = e.angle_deg * std::numbers::pi / 180.0;
        const Vec2 u = m.velocity_scale * Vec2{std::cos(phi), std::sin(phi)};
        FieldData f;
        f.angle_deg = e.angle_deg;
        f.velocity.assign(meshes.at(name).num_nodes(), u);
        const std::string field = sample_field_name(name, static_cast<std::size_t>(angle_counter[name]++));
        save_field(out / field, f);
        baseline.entries.push_back({"baseline", "meshes/" + name, e.angle_deg, field});
    }
    save_manifest(out, baseline);
}

MetricsReport cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& pred, const std::filesystem::path& gt,
                           const std::filesystem::path& out) {
    MetricsReport r = evaluate_dirs(pred, gt, out, cfg.eval);
    stamp_config(out, cfg);
    return r;
}

AblationTable make_ablation_table(const std::vector<std::string>& labels, const std::vector<MetricsReport>& reports) {
    if (labels.size() != reports.size()) throw ConfigError("ablation: one label per report is required");
    AblationTable t;
    t.labels = labels;
    t.metrics = metric_columns();
    t.values.assign(t.metrics.size(), std::vector<double>(reports.size(), std::nan("")));
    for (std::size_t r = 0; r < reports.size(); ++r) {
        for (std::size_t c = 0; c < t.metrics.size(); ++c) t.values[c][r] = all_mean(reports[r], t.metrics[c]);
    }
    return t;
}

std::string format_ablation_csv(const AblationTable& t) {
    std::ostringstream os;
    os << "metric";
    for (const auto& l : t.labels) os << ',' << l;
    os << '\n';
    for (std::size_t c = 0; c < t.metrics.size(); ++c) {
        os << t.metrics[c];
        for (double v : t.values[c]) os << ',' << (std::isnan(v) ? std::string() : format_double(v));
        os << '\n';
    }
    return os.str();
}

std::string format_ablation_text(const AblationTable& t) {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-16s", "metric");
    os << buf;
    for (const auto& l : t.labels) {
        std::snprintf(buf, sizeof buf, " %14s", l.c_str());
        os << buf;
    }
    os << '\n';
    for (std::size_t c = 0; c < t.metrics.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%-16s", t.metrics[c].c_str());
        os << buf;
        for (double v : t.values[c]) {
            std::snprintf(buf, sizeof buf, " %14s", fmt_cell(v).c_str());
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

AblationTable cmd_ablate(const RunConfig& cfg, const std::filesystem::path& checkpoint_a,
                         const std::filesystem::path& checkpoint_b, const std::filesystem::path& dataset,
                         const std::filesystem::path& out) {
    std::vector<std::string> labels;
    std::vector<MetricsReport> reports;
    const std::pair<std::filesystem::path, std::string> runs[] = {{checkpoint_a, "a"}, {checkpoint_b, "b"}};
    for (const auto& [ckpt, dir] : runs) {
        SampleRequest req;
        req.checkpoint = ckpt;
        req.dataset = dataset;
        req.split = cfg.eval.split;
        cmd_sample(cfg, req, out / dir / "samples");
        reports.push_back(cmd_evaluate(cfg, out / dir / "samples", dataset, out / dir / "eval"));
        labels.push_back(load_checkpoint_meta(ckpt).at("mode"));
    }
    if (labels[0] == labels[1]) {
        labels[0] += "_a";
        labels[1] += "_b";
    }
    AblationTable t = make_ablation_table(labels, reports);
    write_file_atomic(out / "ablation.csv", format_ablation_csv(t));
    write_file_atomic(out / "ablation.txt", format_ablation_text(t));
    stamp_config(out, cfg);
    return t;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ValidationError("linear_fit: need at least two (x, y) points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw ValidationError("linear_fit: x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "steps,rel_l2_u,cosine,ssim,eps_s2,mae,time_s\n";
    for (const auto& r : rows) {
        os << r.steps << ',' << format_double(r.rel_l2_u) << ',' << format_double(r.cosine) << ','
           << format_double(r.ssim) << ',' << format_double(r.eps_s2) << ',' << format_double(r.mae) << ','
           << format_double(r.time_s) << '\n';
    }
    return os.str();
}

std::string format_sweep_text(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    char buf[160];
    os << "Metric vs sampler steps\n";
    std::snprintf(buf, sizeof buf, "%6s %12s %12s %12s %12s %12s\n", "N", "rel_l2_u", "cosine", "ssim", "eps_s2", "mae");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%6d %12.6g %12.6g %12.6g %12.6g %12.6g\n", r.steps, r.rel_l2_u, r.cosine,
                      r.ssim, r.eps_s2, r.mae);
        os << buf;
    }
    os << "\nTime vs sampler steps\n";
    std::snprintf(buf, sizeof buf, "%6s %14s\n", "N", "seconds");
    os << buf;
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%6d %14.6g\n", r.steps, r.time_s);
        os << buf;
        xs.push_back(r.steps);
        ys.push_back(r.time_s);
    }
    if (rows.size() >= 2) {
        try {
            const LinearFit f = linear_fit(xs, ys);
            std::snprintf(buf, sizeof buf, "\nlinear fit: time = %.6g * N + %.6g, R^2 = %.6f\n", f.slope, f.intercept, f.r2);
            os << buf;
        } catch (const ValidationError&) {
        }
    }
    return os.str();
}

std::vector<SweepRow> cmd_sweep_steps(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                      const std::filesystem::path& dataset, const std::filesystem::path& out,
                                      const std::vector<int>& steps) {
    const std::vector<int>& counts = steps.empty() ? cfg.sweep_steps : steps;
    std::vector<SweepRow> rows;
    for (int n : counts) {
        SampleRequest req;
        req.checkpoint = checkpoint;
        req.dataset = dataset;
        req.split = cfg.eval.split;
        req.steps = n;
        const std::filesystem::path dir = out / ("n" + std::to_string(n));
        const std::vector<SampleTiming> timing = cmd_sample(cfg, req, dir / "samples");
        const MetricsReport rep = cmd_evaluate(cfg, dir / "samples", dataset, dir / "eval");
        SweepRow row;
        row.steps = n;
        row.rel_l2_u = all_mean(rep, "rel_l2_u");
        row.cosine = all_mean(rep, "cosine");
        row.ssim = all_mean(rep, "ssim");
        row.eps_s2 = all_mean(rep, "eps_s2");
        row.mae = all_mean(rep, "mae");
        double total = 0.0;
        for (const auto& t : timing) total += t.seconds;
        row.time_s = timing.empty() ? 0.0 : total / static_cast<double>(timing.size());
        rows.push_back(row);
    }
    write_file_atomic(out / "sweep.csv", format_sweep_csv(rows));
    write_file_atomic(out / "sweep.txt", format_sweep_text(rows));
    stamp_config(out, cfg);
    return rows;
}

}  // namespace mfd
