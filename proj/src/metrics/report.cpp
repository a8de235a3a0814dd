#include "mfd/metrics/report.hpp"

#include "mfd/error.hpp"
#include "mfd/synthcfd/dataset.hpp"
#include "mfd/util/io.hpp"
#include "mfd/util/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace mfd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }

std::string pair_label(const std::string& mesh, double angle) { return mesh + "@" + format_double(angle); }

std::vector<double> component(std::span<const Vec2> f, bool y) {
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = y ? f[i].y : f[i].x;
    return out;
}

std::string mesh_key(const std::string& path) { return std::filesystem::path(path).filename().string(); }

std::string stem(const std::string& mesh) { return std::filesystem::path(mesh).stem().string(); }

}  // namespace

const std::vector<std::string>& metric_columns() {
    static const std::vector<std::string> cols = {
        "rel_l2_u",    "rel_l2_ux",   "rel_l2_uy",    "rel_l2_mag",   "mae",          "cosine",
        "ssim",        "eps_s2",      "mu_ux_pred",   "sd_ux_pred",   "mu_uy_pred",   "sd_uy_pred",
        "mu_mag_pred", "sd_mag_pred", "mu_ux_true",   "sd_ux_true",   "mu_uy_true",   "sd_uy_true",
        "mu_mag_true", "sd_mag_true", "w1_ux",        "w1_uy",        "w1_mag",       "s2_dropped_bins",
        "time_s"};
    return cols;
}

std::vector<double> metric_values(const AngleRecord& r) {
    const auto& p = r.pointwise;
    return {p.rel_l2_u,
            p.rel_l2_ux,
            p.rel_l2_uy,
            p.rel_l2_mag,
            p.mae,
            p.cosine,
            r.ssim,
            r.eps_s2,
            r.pred_moments.ux.mean,
            r.pred_moments.ux.std,
            r.pred_moments.uy.mean,
            r.pred_moments.uy.std,
            r.pred_moments.mag.mean,
            r.pred_moments.mag.std,
            r.true_moments.ux.mean,
            r.true_moments.ux.std,
            r.true_moments.uy.mean,
            r.true_moments.uy.std,
            r.true_moments.mag.mean,
            r.true_moments.mag.std,
            r.w1_ux,
            r.w1_uy,
            r.w1_mag,
            static_cast<double>(r.s2_dropped_bins),
            r.seconds ? *r.seconds : kNaN};
}

std::size_t metric_index(const std::string& name) {
    const auto& cols = metric_columns();
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw ConfigError("unknown metric '" + name + "'");
    return static_cast<std::size_t>(it - cols.begin());
}

AngleRecord evaluate_pair(const Mesh& mesh, std::span<const Vec2> pred, std::span<const Vec2> gt,
                          const EvalSettings& s) {
    if (pred.size() != mesh.num_nodes() || gt.size() != mesh.num_nodes()) {
        throw ConfigError("evaluate_pair: field sizes do not match the mesh (" + std::to_string(pred.size()) + ", " +
                          std::to_string(gt.size()) + " vs " + std::to_string(mesh.num_nodes()) + ")");
    }
    AngleRecord r;
    r.pointwise = pointwise_metrics(pred, gt);
    r.ssim = ssim_raster(pred, gt, mesh, s.raster_resolution, s.ssim);
    const std::vector<double> mp = magnitudes(pred), mg = magnitudes(gt);
    const StructureFunction sf = structure_function(mp, mg, mesh.coords, s.s2_bins, s.s2_pairs, s.seed);
    r.eps_s2 = sf.eps_s2;
    r.s2_dropped_bins = sf.dropped_bins;
    r.pred_moments = flow_moments(pred);
    r.true_moments = flow_moments(gt);
    r.w1_ux = wasserstein1(component(pred, false), component(gt, false));
    r.w1_uy = wasserstein1(component(pred, true), component(gt, true));
    r.w1_mag = wasserstein1(mp, mg);
    return r;
}

Aggregate aggregate(const std::string& label, const std::vector<AngleRecord>& records) {
    const std::size_t k = metric_columns().size();
    Aggregate a;
    a.label = label;
    a.count = records.size();
    a.mean.assign(k, kNaN);
    a.std.assign(k, kNaN);
    for (std::size_t c = 0; c < k; ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : records) {
            const double v = metric_values(r)[c];
            if (std::isnan(v)) continue;
            sum += v;
            ++n;
        }
        if (n == 0) continue;
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (const auto& r : records) {
            const double v = metric_values(r)[c];
            if (!std::isnan(v)) var += (v - mean) * (v - mean);
        }
        a.mean[c] = mean;
        a.std[c] = std::sqrt(var / static_cast<double>(n));
    }
    return a;
}

std::string format_metrics_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "mesh,angle_deg";
    for (const auto& c : metric_columns()) os << ',' << c;
    os << '\n';
    for (const auto& r : report.records) {
        os << r.mesh << ',' << format_double(r.angle_deg);
        for (double v : metric_values(r)) os << ',' << cell(v);
        os << '\n';
    }
    for (const auto& a : report.aggregates) {
        os << a.label << ",mean";
        for (double v : a.mean) os << ',' << cell(v);
        os << '\n' << a.label << ",std";
        for (double v : a.std) os << ',' << cell(v);
        os << '\n';
    }
    return os.str();
}

std::string format_metrics_text(const MetricsReport& report) {
    const EvalSettings& s = report.settings;
    std::ostringstream os;
    os << "Flow field evaluation\n";
    os << "  raster: " << s.raster_resolution << "x" << s.raster_resolution
       << " cells, linear interpolation in triangles, obstacle cells masked\n";
    os << "  ssim: gaussian window " << s.ssim.window << "x" << s.ssim.window << " sigma " << format_double(s.ssim.sigma)
       << ", k1 " << format_double(s.ssim.k1) << ", k2 " << format_double(s.ssim.k2)
       << ", dynamic range = max |u| over both fields\n";
    os << "  structure function: " << s.s2_bins << " log bins, up to " << s.s2_pairs << " pairs, seed " << s.seed << "\n";
    os << "  kde: gaussian, silverman bandwidth; W1 from exact quantile matching\n";
    os << "  pairs evaluated: " << report.records.size() << "\n";
    if (!report.missing.empty()) {
        os << "  missing predictions (" << report.missing.size() << "):";
        for (const auto& m : report.missing) os << ' ' << m;
        os << '\n';
    }
    if (!report.unmatched.empty()) {
        os << "  predictions without ground truth (" << report.unmatched.size() << "):";
        for (const auto& m : report.unmatched) os << ' ' << m;
        os << '\n';
    }
    int dropped = 0;
    for (const auto& r : report.records) dropped += r.s2_dropped_bins;
    if (dropped > 0) os << "  empty structure-function bins dropped: " << dropped << "\n";
    os << '\n';
    for (const auto& a : report.aggregates) {
        os << a.label << " (" << a.count << " angles)\n";
        const auto& cols = metric_columns();
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (std::isnan(a.mean[c])) continue;
            char buf[128];
            std::snprintf(buf, sizeof buf, "  %-16s %12.6g +- %-12.6g\n", cols[c].c_str(), a.mean[c], a.std[c]);
            os << buf;
        }
    }
    for (const auto& m : report.meshes) {
        os << "\nPOD energy " << m.mesh << " (" << m.angles << " snapshots)"
           << (m.pod_true.degenerate ? " [reference degenerate]" : "")
           << (m.pod_pred.degenerate ? " [prediction degenerate]" : "") << "\n";
        const std::size_t k = std::min<std::size_t>(5, m.pod_true.energy.size());
        for (std::size_t i = 0; i < k; ++i) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "  mode %zu  true %.6f  pred %.6f\n", i + 1, m.pod_true.energy[i],
                          i < m.pod_pred.energy.size() ? m.pod_pred.energy[i] : 0.0);
            os << buf;
        }
    }
    return os.str();
}

std::vector<TimingRow> load_timing(const std::filesystem::path& csv) {
    std::vector<TimingRow> rows;
    std::istringstream is(read_file(csv));
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;
        const std::string where = csv.string() + ":" + std::to_string(line_no);
        const auto c1 = line.find(','), c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) throw ParseError(where + ": expected mesh,angle_deg,seconds");
        TimingRow r;
        r.mesh = line.substr(0, c1);
        r.angle_deg = parse_double(line.substr(c1 + 1, c2 - c1 - 1), where);
        r.seconds = parse_double(line.substr(c2 + 1), where);
        rows.push_back(r);
    }
    return rows;
}

std::string format_pgm(const RasterField& r, double vmax) {
    std::string out = "P5\n" + std::to_string(r.resolution) + " " + std::to_string(r.resolution) + "\n255\n";
    const double scale = vmax > 0.0 ? 255.0 / vmax : 0.0;
    // Image rows run top to bottom, raster rows bottom to top.
    for (int row = r.resolution - 1; row >= 0; --row) {
        for (int col = 0; col < r.resolution; ++col) {
            const double v = r.valid(row, col) ? std::clamp(r.at(row, col) * scale, 0.0, 255.0) : 0.0;
            out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
        }
    }
    return out;
}

namespace {

std::string raster_csv(const RasterField& r) {
    std::ostringstream os;
    os << "row,col,x,y,value,valid\n";
    for (int row = 0; row < r.resolution; ++row) {
        for (int col = 0; col < r.resolution; ++col) {
            os << row << ',' << col << ',' << format_double(r.x0 + (col + 0.5) * r.dx) << ','
               << format_double(r.y0 + (row + 0.5) * r.dy) << ',' << format_double(r.at(row, col)) << ','
               << (r.valid(row, col) ? 1 : 0) << '\n';
        }
    }
    return os.str();
}

struct PairJob {
    std::string mesh;
    std::filesystem::path mesh_path;
    double angle = 0.0;
    std::filesystem::path pred_path;
    std::filesystem::path gt_path;
};

}  // namespace

MetricsReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                            const std::filesystem::path& out_dir, const EvalSettings& s) {
    const DatasetManifest gt = load_manifest(gt_dir);
    const DatasetManifest pred = load_manifest(pred_dir);
    MetricsReport report;
    report.settings = s;

    auto same_angle = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
    std::vector<PairJob> jobs;
    std::vector<char> used(pred.entries.size(), 0);
    for (const auto& e : gt.entries) {
        if (e.split != s.split) continue;
        const std::string key = mesh_key(e.mesh_path);
        std::size_t found = pred.entries.size();
        for (std::size_t k = 0; k < pred.entries.size(); ++k) {
            if (!used[k] && mesh_key(pred.entries[k].mesh_path) == key && same_angle(pred.entries[k].angle_deg, e.angle_deg)) {
                found = k;
                break;
            }
        }
        if (found == pred.entries.size()) {
            report.missing.push_back(pair_label(key, e.angle_deg));
            continue;
        }
        used[found] = 1;
        jobs.push_back({key, gt_dir / e.mesh_path, e.angle_deg, pred_dir / pred.entries[found].field_path,
                        gt_dir / e.field_path});
    }
    for (std::size_t k = 0; k < pred.entries.size(); ++k) {
        if (!used[k]) report.unmatched.push_back(pair_label(mesh_key(pred.entries[k].mesh_path), pred.entries[k].angle_deg));
    }
    if (jobs.empty()) throw ValidationError("evaluate: no (mesh, angle) pair matched between " + pred_dir.string() +
                                            " and " + gt_dir.string());
    std::sort(jobs.begin(), jobs.end(), [](const PairJob& a, const PairJob& b) {
        return a.mesh != b.mesh ? a.mesh < b.mesh : a.angle < b.angle;
    });

    std::map<std::string, Mesh> meshes;
    for (const auto& j : jobs) {
        if (!meshes.count(j.mesh)) meshes.emplace(j.mesh, load_mesh(j.mesh_path));
    }
    std::vector<FieldData> pred_fields(jobs.size()), gt_fields(jobs.size());
    report.records.resize(jobs.size());
    parallel_for(jobs.size(), s.workers, [&](std::size_t i) {
        const PairJob& j = jobs[i];
        pred_fields[i] = load_field(j.pred_path);
        gt_fields[i] = load_field(j.gt_path);
        try {
            report.records[i] = evaluate_pair(meshes.at(j.mesh), pred_fields[i].velocity, gt_fields[i].velocity, s);
        } catch (const std::exception& e) {
            throw ValidationError(pair_label(j.mesh, j.angle) + ": " + e.what());
        }
        report.records[i].mesh = j.mesh;
        report.records[i].angle_deg = j.angle;
    });

    const std::filesystem::path timing = pred_dir / "timing.csv";
    if (std::filesystem::exists(timing)) {
        for (const auto& t : load_timing(timing)) {
            for (auto& r : report.records) {
                if (r.mesh == mesh_key(t.mesh) && same_angle(r.angle_deg, t.angle_deg)) r.seconds = t.seconds;
            }
        }
    }

    std::filesystem::create_directories(out_dir / "plots");
    for (const auto& [name, mesh] : meshes) {
        std::vector<AngleRecord> per_mesh;
        std::vector<std::vector<Vec2>> snaps_pred, snaps_true;
        std::vector<double> mag_pred, mag_true;
        std::size_t first = jobs.size();
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].mesh != name) continue;
            if (first == jobs.size()) first = i;
            per_mesh.push_back(report.records[i]);
            snaps_pred.push_back(pred_fields[i].velocity);
            snaps_true.push_back(gt_fields[i].velocity);
            for (double v : magnitudes(pred_fields[i].velocity)) mag_pred.push_back(v);
            for (double v : magnitudes(gt_fields[i].velocity)) mag_true.push_back(v);
        }
        report.aggregates.push_back(aggregate(name, per_mesh));
        MeshSummary summary;
        summary.mesh = name;
        summary.angles = per_mesh.size();
        if (snaps_pred.size() >= 2) {
            summary.pod_pred = pod_energy(snaps_pred);
            summary.pod_true = pod_energy(snaps_true);
            std::ostringstream pod;
            pod << "mode,energy_true,energy_pred\n";
            for (std::size_t k = 0; k < summary.pod_true.energy.size(); ++k) {
                pod << k + 1 << ',' << format_double(summary.pod_true.energy[k]) << ','
                    << format_double(k < summary.pod_pred.energy.size() ? summary.pod_pred.energy[k] : 0.0) << '\n';
            }
            write_file_atomic(out_dir / "plots" / (stem(name) + "_pod.csv"), pod.str());
        }
        report.meshes.push_back(summary);

        // Curves for the first evaluated angle and pooled |u| densities.
        const std::vector<Vec2>& fp = pred_fields[first].velocity;
        const std::vector<Vec2>& ft = gt_fields[first].velocity;
        const std::vector<double> mp = magnitudes(fp), mt = magnitudes(ft);
        double vmax = 0.0;
        for (double v : mp) vmax = std::max(vmax, v);
        for (double v : mt) vmax = std::max(vmax, v);
        const RasterField rp = rasterize(mesh, mp, s.raster_resolution), rt = rasterize(mesh, mt, s.raster_resolution);
        const std::string base = stem(name) + "_a" + format_double(jobs[first].angle);
        write_file_atomic(out_dir / "plots" / (base + "_mag_pred.pgm"), format_pgm(rp, vmax));
        write_file_atomic(out_dir / "plots" / (base + "_mag_true.pgm"), format_pgm(rt, vmax));
        write_file_atomic(out_dir / "plots" / (base + "_mag_pred.csv"), raster_csv(rp));
        write_file_atomic(out_dir / "plots" / (base + "_mag_true.csv"), raster_csv(rt));
        const StructureFunction sf = structure_function(mp, mt, mesh.coords, s.s2_bins, s.s2_pairs, s.seed);
        std::ostringstream s2;
        s2 << "r,s2_true,s2_pred,pairs\n";
        for (std::size_t k = 0; k < sf.r.size(); ++k) {
            s2 << format_double(sf.r[k]) << ',' << format_double(sf.s2_true[k]) << ',' << format_double(sf.s2_pred[k])
               << ',' << sf.count[k] << '\n';
        }
        write_file_atomic(out_dir / "plots" / (base + "_s2.csv"), s2.str());
        if (mag_pred.size() >= 10) {
            const PdfComparison pdf = pdf_wasserstein(mag_pred, mag_true, s.kde_points);
            std::ostringstream kde;
            kde << "mag,pdf_true,pdf_pred\n";
            for (std::size_t k = 0; k < pdf.grid.size(); ++k) {
                kde << format_double(pdf.grid[k]) << ',' << format_double(pdf.pdf_true[k]) << ','
                    << format_double(pdf.pdf_pred[k]) << '\n';
            }
            write_file_atomic(out_dir / "plots" / (stem(name) + "_mag_pdf.csv"), kde.str());
        }
    }
    report.aggregates.push_back(aggregate("ALL", report.records));

    write_file_atomic(out_dir / "metrics.csv", format_metrics_csv(report));
    write_file_atomic(out_dir / "report.txt", format_metrics_text(report));
    return report;
}

}  // namespace mfd
