#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wedgefill/wedgefill.hpp"

namespace fs = std::filesystem;
using namespace wedgefill;

namespace {

struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int max_threads() {
    const char* env = std::getenv("WEDGEFILL_THREADS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n >= 1 ? n : 1;
}

struct Ctx {
    RunConfig cfg;
    fs::path out;
    std::optional<uint64_t> seed_override;
    bool force = false;
};

uint64_t stage_seed(const Ctx& ctx, uint64_t cfg_seed) {
    return ctx.seed_override ? *ctx.seed_override : cfg_seed;
}

void write_manifest(const Ctx& ctx, const std::string& stage, uint64_t seed) {
    char line[256];
    std::snprintf(line, sizeof(line), "stage = %s\nconfig_hash = %016llx\nseed = %llu\nthreads = %d\nversion = 1\n",
                  stage.c_str(), static_cast<unsigned long long>(config_hash(ctx.cfg)),
                  static_cast<unsigned long long>(seed), max_threads());
    write_file_atomic(ctx.out / ("manifest_" + stage + ".txt"), line);
    write_file_atomic(ctx.out / "config.ini", serialize_config(ctx.cfg));
}

Dataset require_dataset(const Ctx& ctx) {
    const fs::path p = ctx.out / "dataset.tn";
    if (!fs::exists(p)) throw MissingArtifact("missing artifact: " + p.string() + " (run gen-dataset first)");
    return dataset_from_container(load_container(p));
}

Checkpoint require_checkpoint(const Ctx& ctx, const std::string& name) {
    const fs::path p = ctx.out / name;
    if (!fs::exists(p)) throw MissingArtifact("missing artifact: " + p.string());
    Checkpoint ck = load_checkpoint(p);
    if (ck.config_hash != config_hash(ctx.cfg)) {
        std::fprintf(stderr, "warning: %s was trained under a different config (hash %016llx vs %016llx)%s\n",
                     name.c_str(), static_cast<unsigned long long>(ck.config_hash),
                     static_cast<unsigned long long>(config_hash(ctx.cfg)),
                     ctx.force ? ", proceeding (--force)" : "");
    }
    return ck;
}

void save_stage(const Ctx& ctx, const std::string& name, const NetSpec& spec,
                const ModelParams& params, uint64_t seed) {
    Checkpoint ck{spec, params, config_hash(ctx.cfg), seed};
    save_checkpoint(ctx.out / name, ck);
}

void append_loss_log(const Ctx& ctx, const std::string& name, int64_t first_step,
                     const std::vector<double>& losses) {
    const fs::path p = ctx.out / name;
    const bool fresh = first_step == 0 || !fs::exists(p);
    std::ofstream f(p, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) f << "step,loss\n";
    char line[64];
    for (size_t i = 0; i < losses.size(); ++i) {
        std::snprintf(line, sizeof(line), "%lld,%.9g\n",
                      static_cast<long long>(first_step + 1 + static_cast<int64_t>(i)), losses[i]);
        f << line;
    }
}

int cmd_gen_dataset(const Ctx& ctx) {
    const uint64_t seed = stage_seed(ctx, ctx.cfg.eval_seed);
    Dataset ds;
    if (!ctx.cfg.raw_dir.empty()) {
        ds = import_raw_dataset(ctx.cfg.raw_dir, ctx.cfg.raw_size, ctx.cfg.hu_lo, ctx.cfg.hu_hi,
                                ctx.cfg.geometry(), ctx.cfg.num_train);
    } else {
        ds = synthesize_dataset(ctx.cfg.image_size, ctx.cfg.geometry(), ctx.cfg.num_train,
                                ctx.cfg.num_test, seed);
    }
    save_container(ctx.out / "dataset.tn", dataset_to_container(ds, ctx.cfg.scenarios_deg));
    write_manifest(ctx, "gen-dataset", seed);
    std::printf("dataset: %zu items (%d train) at %d^2, %d angles\n", ds.items.size(), ds.num_train,
                ds.image_size, ds.geo.num_angles);
    return 0;
}

TrainingConfig base_train_cfg(const Ctx& ctx) {
    TrainingConfig tc;
    tc.boundary_weight = ctx.cfg.boundary_weight;
    tc.proxy_gamma = ctx.cfg.proxy_gamma;
    tc.proxy_weight = ctx.cfg.postproc_proxy_weight;
    tc.n_ensemble = ctx.cfg.postproc_ensemble;
    return tc;
}

int cmd_train(const Ctx& ctx, const std::string& stage) {
    Dataset ds = require_dataset(ctx);
    const AngleMask mask = make_wedge_mask(ds.geo, ctx.cfg.scenario_deg);
    const double scale = ctx.cfg.sino_scale();
    const NoiseSchedule sched = ctx.cfg.schedule();
    TrainingConfig tc = base_train_cfg(ctx);

    if (stage == "score") {
        tc.iterations = ctx.cfg.score_iterations;
        tc.batch_size = ctx.cfg.score_batch;
        tc.lr = ctx.cfg.score_lr;
        tc.lr_min = ctx.cfg.score_lr_min;
        tc.hidden_channels = ctx.cfg.score_hidden;
        tc.seed = stage_seed(ctx, ctx.cfg.score_seed);
        auto samples = make_sino_samples(ds, mask, scale, true);
        std::optional<Checkpoint> prev;
        if (fs::exists(ctx.out / "score.ckpt")) prev = require_checkpoint(ctx, "score.ckpt");
        const int64_t first = prev ? prev->params.step_count : 0;
        TrainResult r = train_score(samples, mask, sched, tc, prev ? &prev->params : nullptr);
        save_stage(ctx, "score.ckpt", score_net_spec(tc.hidden_channels), r.params, tc.seed);
        append_loss_log(ctx, "score_loss.csv", first, r.loss_log);
        write_manifest(ctx, "train-score", tc.seed);
        std::printf("score: %zu new steps, final loss %.6g\n", r.loss_log.size(),
                    r.loss_log.empty() ? 0.0 : r.loss_log.back());
        return 0;
    }
    if (stage == "distill") {
        Checkpoint score = require_checkpoint(ctx, "score.ckpt");
        tc.iterations = ctx.cfg.distill_iterations;
        tc.batch_size = ctx.cfg.distill_batch;
        tc.lr = ctx.cfg.distill_lr;
        tc.lr_min = ctx.cfg.distill_lr_min;
        tc.hidden_channels = ctx.cfg.distill_hidden;
        tc.seed = stage_seed(ctx, ctx.cfg.distill_seed);
        auto samples = make_sino_samples(ds, mask, scale, true);
        std::printf("generating %d teacher pairs...\n", ctx.cfg.distill_pairs);
        auto pairs = generate_pairs(score.params, score.spec, sched, samples, ctx.cfg.distill_pairs,
                                    Rng(tc.seed).derive(0xFA12).next_u64());
        std::optional<Checkpoint> prev;
        if (fs::exists(ctx.out / "student.ckpt")) prev = require_checkpoint(ctx, "student.ckpt");
        const int64_t first = prev ? prev->params.step_count : 0;
        TrainResult r = distill_student(pairs, mask, tc, prev ? &prev->params : nullptr);
        save_stage(ctx, "student.ckpt", student_net_spec(tc.hidden_channels), r.params, tc.seed);
        append_loss_log(ctx, "distill_loss.csv", first, r.loss_log);
        write_manifest(ctx, "train-distill", tc.seed);
        std::printf("distill: %zu new steps, final loss %.6g\n", r.loss_log.size(),
                    r.loss_log.empty() ? 0.0 : r.loss_log.back());
        return 0;
    }
    if (stage == "postproc") {
        Checkpoint student = require_checkpoint(ctx, "student.ckpt");
        tc.iterations = ctx.cfg.postproc_iterations;
        tc.batch_size = ctx.cfg.postproc_batch;
        tc.lr = ctx.cfg.postproc_lr;
        tc.lr_min = ctx.cfg.postproc_lr_min;
        tc.hidden_channels = ctx.cfg.postproc_hidden;
        tc.seed = stage_seed(ctx, ctx.cfg.postproc_seed);
        std::vector<PostprocSample> samples;
        for (int i = 0; i < ds.num_train; ++i)
            samples.push_back(make_postproc_sample(student.params, student.spec, sched,
                                                   ds.train_item(i), mask, scale, tc.n_ensemble,
                                                   Rng(tc.seed).derive(0xFB00 + i).next_u64()));
        std::optional<Checkpoint> prev;
        if (fs::exists(ctx.out / "tau.ckpt")) prev = require_checkpoint(ctx, "tau.ckpt");
        const int64_t first = prev ? prev->params.step_count : 0;
        TrainResult r = train_postproc(samples, tc, prev ? &prev->params : nullptr);
        save_stage(ctx, "tau.ckpt", postproc_net_spec(tc.hidden_channels), r.params, tc.seed);
        append_loss_log(ctx, "postproc_loss.csv", first, r.loss_log);
        write_manifest(ctx, "train-postproc", tc.seed);
        std::printf("postproc: %zu new steps, final loss %.6g\n", r.loss_log.size(),
                    r.loss_log.empty() ? 0.0 : r.loss_log.back());
        return 0;
    }
    if (stage == "ablations") {
        // extra variants consumed by `eval`: direct-MSE inpainter, refinement
        // without the proxy term, refinement on the bare masked FBP
        Checkpoint student = require_checkpoint(ctx, "student.ckpt");
        auto samples = make_sino_samples(ds, mask, scale, true);
        TrainingConfig mc = tc;
        mc.iterations = ctx.cfg.distill_iterations;
        mc.batch_size = ctx.cfg.distill_batch;
        mc.lr = ctx.cfg.distill_lr;
        mc.lr_min = ctx.cfg.distill_lr_min;
        mc.hidden_channels = ctx.cfg.distill_hidden;
        mc.seed = stage_seed(ctx, ctx.cfg.distill_seed) + 101;
        TrainResult mi = train_mse_inpainter(samples, mc);
        save_stage(ctx, "mse_inpaint.ckpt", mse_net_spec(mc.hidden_channels), mi.params, mc.seed);

        TrainingConfig pc = tc;
        pc.iterations = ctx.cfg.postproc_iterations;
        pc.batch_size = ctx.cfg.postproc_batch;
        pc.lr = ctx.cfg.postproc_lr;
        pc.lr_min = ctx.cfg.postproc_lr_min;
        pc.hidden_channels = ctx.cfg.postproc_hidden;
        std::vector<PostprocSample> ps, ps_direct;
        for (int i = 0; i < ds.num_train; ++i) {
            ps.push_back(make_postproc_sample(student.params, student.spec, sched, ds.train_item(i),
                                              mask, scale, pc.n_ensemble,
                                              Rng(ctx.cfg.postproc_seed).derive(0xFB00 + i).next_u64()));
            ps_direct.push_back(make_postproc_sample(student.params, student.spec, sched,
                                                     ds.train_item(i), mask, scale, pc.n_ensemble, 0,
                                                     false));
        }
        pc.seed = stage_seed(ctx, ctx.cfg.postproc_seed) + 202;
        pc.proxy_weight = 0.0;
        TrainResult np = train_postproc(ps, pc);
        save_stage(ctx, "tau_noproxy.ckpt", postproc_net_spec(pc.hidden_channels), np.params, pc.seed);
        pc.seed = stage_seed(ctx, ctx.cfg.postproc_seed) + 303;
        pc.proxy_weight = ctx.cfg.postproc_proxy_weight;
        TrainResult nsi = train_postproc(ps_direct, pc);
        save_stage(ctx, "tau_nosinoinp.ckpt", postproc_net_spec(pc.hidden_channels), nsi.params, pc.seed);
        write_manifest(ctx, "train-ablations", stage_seed(ctx, ctx.cfg.distill_seed));
        std::printf("ablation variants trained\n");
        return 0;
    }
    throw ConfigError("unknown stage: " + stage + " (expected score|distill|postproc|ablations)");
}

int cmd_infer(const Ctx& ctx, int phantom_idx) {
    Dataset ds = require_dataset(ctx);
    Checkpoint student = require_checkpoint(ctx, "student.ckpt");
    Checkpoint tau = require_checkpoint(ctx, "tau.ckpt");
    if (phantom_idx < 0 || phantom_idx >= ds.num_test())
        throw ConfigError("phantom index out of range (test split has " +
                          std::to_string(ds.num_test()) + " items)");
    const DatasetItem& it = ds.test_item(phantom_idx);
    const AngleMask mask = make_wedge_mask(ds.geo, ctx.cfg.scenario_deg);
    const uint64_t seed = stage_seed(ctx, ctx.cfg.eval_seed);
    RestoreResult rr = full_restore(student.params, student.spec, tau.params, tau.spec,
                                    ctx.cfg.schedule(), it.sino, mask, ds.image_size,
                                    ctx.cfg.sino_scale(), ctx.cfg.eval_ensemble, seed);
    const fs::path dir = ctx.out / "infer";
    fs::create_directories(dir);
    write_pgm16(dir / "final.pgm", rr.refined);
    Image mean_c = rr.fbp_mean, std_c = rr.fbp_std, masked = fbp(apply_mask(it.sino, mask),
                                                                 ds.image_size, Apodization::None);
    clip01(mean_c);
    clip01(std_c);
    clip01(masked);
    write_pgm16(dir / "fbp_mean.pgm", mean_c);
    write_pgm16(dir / "fbp_std.pgm", std_c);
    write_pgm16(dir / "masked_fbp.pgm", masked);
    write_pgm16(dir / "ground_truth.pgm", it.phantom);
    TensorContainer tc;
    for (size_t i = 0; i < rr.inpainted.size(); ++i)
        put_grid(tc, detail::item_key("sino", static_cast<int>(i)), rr.inpainted[i].data);
    put_grid(tc, "refined", rr.refined);
    save_container(dir / "restore.tn", tc);
    write_manifest(ctx, "infer", seed);
    std::printf("infer: phantom %d, PSNR %.2f dB (masked FBP %.2f dB)\n", phantom_idx,
                psnr(rr.refined, it.phantom), psnr(masked, it.phantom));
    return 0;
}

int cmd_eval(const Ctx& ctx) {
    Dataset ds = require_dataset(ctx);
    EvalArtifacts art;
    if (fs::exists(ctx.out / "student.ckpt") && fs::exists(ctx.out / "tau.ckpt")) {
        Checkpoint s = require_checkpoint(ctx, "student.ckpt");
        Checkpoint t = require_checkpoint(ctx, "tau.ckpt");
        art.has_pipeline = true;
        art.trained_scenario_deg = ctx.cfg.scenario_deg;
        art.student_spec = s.spec;
        art.student = s.params;
        art.tau_spec = t.spec;
        art.tau = t.params;
    } else {
        std::fprintf(stderr, "warning: pipeline checkpoints missing, pipeline rows skipped\n");
    }
    if (fs::exists(ctx.out / "mse_inpaint.ckpt")) {
        Checkpoint c = require_checkpoint(ctx, "mse_inpaint.ckpt");
        art.has_mse_inpainter = true;
        art.mse_spec = c.spec;
        art.mse_inpainter = c.params;
    }
    if (fs::exists(ctx.out / "tau_noproxy.ckpt")) {
        art.has_tau_noproxy = true;
        art.tau_noproxy = require_checkpoint(ctx, "tau_noproxy.ckpt").params;
    }
    if (fs::exists(ctx.out / "tau_nosinoinp.ckpt")) {
        art.has_tau_nosinoinp = true;
        art.tau_nosinoinp = require_checkpoint(ctx, "tau_nosinoinp.ckpt").params;
    }
    const uint64_t seed = stage_seed(ctx, ctx.cfg.eval_seed);
    const NoiseSchedule sched = ctx.cfg.schedule();
    std::string cmp = run_comparison(ds, art, sched, ctx.cfg.sino_scale(), ctx.cfg.scenarios_deg,
                                     ctx.cfg.runs, ctx.cfg.tv_lambda, ctx.cfg.tv_iters,
                                     ctx.cfg.eval_ensemble, seed);
    write_file_atomic(ctx.out / "comparison.csv", cmp);
    std::string abl = run_ablations(ds, art, sched, ctx.cfg.sino_scale(), ctx.cfg.scenario_deg,
                                    ctx.cfg.eval_ensemble, seed);
    write_file_atomic(ctx.out / "ablations.csv", abl);
    write_manifest(ctx, "eval", seed);
    std::printf("eval: wrote comparison.csv and ablations.csv\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"limited-angle CT sinogram inpainting workbench"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", stage = "score";
    uint64_t seed_val = 0;
    bool have_seed = false, force = false;
    int phantom_idx = 0;

    auto add_common = [&](CLI::App* sub, bool needs_stage, bool needs_phantom) {
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--out", out_dir, "artifact directory");
        sub->add_option("--seed", seed_val, "override the stage seed")->each([&](const std::string&) {
            have_seed = true;
        });
        sub->add_flag("--force", force, "proceed on config-hash mismatch");
        if (needs_stage)
            sub->add_option("--stage", stage, "score|distill|postproc|ablations");
        if (needs_phantom)
            sub->add_option("--phantom", phantom_idx, "test-split phantom index");
    };

    CLI::App* gen = app.add_subcommand("gen-dataset", "synthesize or import the dataset");
    CLI::App* train = app.add_subcommand("train", "train one pipeline stage");
    CLI::App* infer = app.add_subcommand("infer", "restore one phantom end to end");
    CLI::App* evalc = app.add_subcommand("eval", "comparison and ablation tables");
    add_common(gen, false, false);
    add_common(train, true, false);
    add_common(infer, false, true);
    add_common(evalc, false, false);

    CLI11_PARSE(app, argc, argv);

    try {
        Ctx ctx;
        ctx.cfg = load_config(config_path);
        validate_config(ctx.cfg);
        ctx.out = out_dir;
        ctx.force = force;
        if (have_seed) ctx.seed_override = seed_val;
        fs::create_directories(ctx.out);
        if (gen->parsed()) return cmd_gen_dataset(ctx);
        if (train->parsed()) return cmd_train(ctx, stage);
        if (infer->parsed()) return cmd_infer(ctx, phantom_idx);
        if (evalc->parsed()) return cmd_eval(ctx);
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const MissingArtifact& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
