#include "mfd/cli/commands.hpp"
#include "mfd/error.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    int workers = -1;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("-c,--config", c.config, "INI run configuration")->required()->check(CLI::ExistingFile);
    app->add_option("--set", c.overrides, "Override a config key: section.key=value (repeatable)");
    app->add_option("-j,--workers", c.workers, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
}

mfd::RunConfig load(const Common& c, std::vector<std::string> extra = {}) {
    std::vector<std::string> all = c.overrides;
    all.insert(all.end(), extra.begin(), extra.end());
    mfd::RunConfig cfg = mfd::load_run_config(c.config, all);
    if (c.workers >= 0) mfd::set_workers(cfg, c.workers);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometry-conditioned diffusion sampling of 2D flow fields on unstructured meshes"};
    app.require_subcommand(1);

    Common gen_c;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "Generate synthetic meshes, flow fields, manifest and graphs");
    add_common(gen, gen_c);
    gen->add_option("-o,--out", gen_out, "Dataset directory")->required();

    Common bg_c;
    std::string bg_data, bg_out;
    auto* bg = app.add_subcommand("build-graphs", "Build and save the multiscale graph of every dataset mesh");
    add_common(bg, bg_c);
    bg->add_option("-d,--data", bg_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    bg->add_option("-o,--out", bg_out, "Output directory")->required();

    Common tr_c;
    std::string tr_data, tr_out, tr_mode;
    bool tr_full = false;
    auto* tr = app.add_subcommand("train", "Train the denoiser on the dataset's train split");
    add_common(tr, tr_c);
    tr->add_option("-d,--data", tr_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    tr->add_option("-o,--out", tr_out, "Run directory for checkpoint and loss trace")->required();
    tr->add_option("--mode", tr_mode, "Architecture: multiscale or single_scale");
    tr->add_flag("--full-scale", tr_full, "200k steps at batch 2 instead of the configured budget");

    Common sa_c;
    std::string sa_ckpt, sa_data, sa_split = "test", sa_out, sa_angles;
    std::vector<std::string> sa_meshes;
    int sa_steps = 0;
    auto* sa = app.add_subcommand("sample", "Generate flow fields from a trained checkpoint");
    add_common(sa, sa_c);
    sa->add_option("-k,--checkpoint", sa_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    sa->add_option("-d,--data", sa_data, "Dataset directory supplying meshes")->check(CLI::ExistingDirectory);
    sa->add_option("--split", sa_split, "Dataset split to sample")->capture_default_str();
    sa->add_option("-m,--mesh", sa_meshes, "Mesh file (repeatable)")->check(CLI::ExistingFile);
    sa->add_option("-a,--angles", sa_angles, "Angles in degrees: 0,10,20 or start:stop:step");
    sa->add_option("-n,--steps", sa_steps, "Sampler steps")->check(CLI::PositiveNumber);
    sa->add_option("-o,--out", sa_out, "Output directory")->required();

    Common ev_c;
    std::string ev_pred, ev_gt, ev_out;
    auto* ev = app.add_subcommand("evaluate", "Compare generated fields against ground truth");
    add_common(ev, ev_c);
    ev->add_option("-p,--pred", ev_pred, "Directory of generated fields")->required()->check(CLI::ExistingDirectory);
    ev->add_option("-g,--gt", ev_gt, "Ground-truth dataset directory")->required()->check(CLI::ExistingDirectory);
    ev->add_option("-o,--out", ev_out, "Report directory")->required();

    Common ab_c;
    std::string ab_a, ab_b, ab_data, ab_out;
    auto* ab = app.add_subcommand("ablate", "Side-by-side metrics of two checkpoints");
    add_common(ab, ab_c);
    ab->add_option("--a", ab_a, "First checkpoint")->required()->check(CLI::ExistingFile);
    ab->add_option("--b", ab_b, "Second checkpoint")->required()->check(CLI::ExistingFile);
    ab->add_option("-d,--data", ab_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    ab->add_option("-o,--out", ab_out, "Output directory")->required();

    Common sw_c;
    std::string sw_ckpt, sw_data, sw_out, sw_steps;
    auto* sw = app.add_subcommand("sweep-steps", "Metrics and sampling time against sampler step count");
    add_common(sw, sw_c);
    sw->add_option("-k,--checkpoint", sw_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    sw->add_option("-d,--data", sw_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    sw->add_option("--steps", sw_steps, "Comma-separated step counts (default: sample.sweep_steps)");
    sw->add_option("-o,--out", sw_out, "Output directory")->required();

    std::string bl_data, bl_split = "test", bl_out;
    auto* bl = app.add_subcommand("baseline", "Write the angle-only uniform-flow reference for a dataset split");
    bl->add_option("-d,--data", bl_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    bl->add_option("--split", bl_split, "Dataset split")->capture_default_str();
    bl->add_option("-o,--out", bl_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto cfg = load(gen_c);
            const auto m = mfd::cmd_gen_data(cfg, gen_out);
            std::printf("wrote %zu fields over %zu meshes to %s\n", m.entries.size(), m.meshes().size(), gen_out.c_str());
        } else if (bg->parsed()) {
            const auto stats = mfd::cmd_build_graphs(load(bg_c), bg_data, bg_out);
            std::cout << mfd::format_graph_stats(stats);
        } else if (tr->parsed()) {
            std::vector<std::string> extra;
            if (!tr_mode.empty()) extra.push_back("model.mode=" + tr_mode);
            auto cfg = load(tr_c, extra);
            if (tr_full) mfd::apply_full_scale_preset(cfg);
            const auto r = mfd::cmd_train(cfg, tr_data, tr_out);
            std::printf("trained %lld steps, sigma_data %.6g, checkpoint %s\n",
                        static_cast<long long>(r.result.steps_done), r.sigma_data, r.checkpoint.string().c_str());
        } else if (sa->parsed()) {
            const auto cfg = load(sa_c);
            mfd::SampleRequest req;
            req.checkpoint = sa_ckpt;
            if (!sa_data.empty()) req.dataset = sa_data;
            req.split = sa_split;
            for (const auto& m : sa_meshes) req.meshes.emplace_back(m);
            if (!sa_angles.empty()) req.angles = mfd::parse_angle_list(sa_angles);
            if (sa_steps > 0) req.steps = sa_steps;
            const auto timing = mfd::cmd_sample(cfg, req, sa_out);
            double total = 0.0;
            for (const auto& t : timing) total += t.seconds;
            std::printf("wrote %zu fields to %s, mean %.4g s per sample\n", timing.size(), sa_out.c_str(),
                        timing.empty() ? 0.0 : total / static_cast<double>(timing.size()));
        } else if (ev->parsed()) {
            const auto report = mfd::cmd_evaluate(load(ev_c), ev_pred, ev_gt, ev_out);
            std::cout << mfd::format_metrics_text(report);
        } else if (ab->parsed()) {
            const auto t = mfd::cmd_ablate(load(ab_c), ab_a, ab_b, ab_data, ab_out);
            std::cout << mfd::format_ablation_text(t);
        } else if (sw->parsed()) {
            std::vector<int> steps;
            if (!sw_steps.empty()) steps = mfd::parse_int_list(sw_steps, "--steps");
            const auto rows = mfd::cmd_sweep_steps(load(sw_c), sw_ckpt, sw_data, sw_out, steps);
            std::cout << mfd::format_sweep_text(rows);
        } else if (bl->parsed()) {
            mfd::write_uniform_baseline(bl_data, bl_split, bl_out);
            std::printf("wrote uniform-flow reference for split '%s' to %s\n", bl_split.c_str(), bl_out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mfd: error: %s\n", e.what());
        return 1;
    }
    return 0;
}
