#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "wedgefill/checkpoint.hpp"
#include "wedgefill/dataset.hpp"
#include "wedgefill/metrics.hpp"
#include "wedgefill/pipeline.hpp"

using namespace wedgefill;

namespace {

// Shared smoke setup: tiny geometry so training stages fit in seconds to
// minutes, computed once per process.
struct Smoke {
    ScanGeometry geo{30, 6.0, 46, 1.0};
    int n = 32;
    double scale = 32.0;
    NoiseSchedule sched = make_linear_schedule(20, 0.15);
    Dataset ds;
    AngleMask mask;
    std::vector<SinoSample> train, test;
    TrainingConfig score_cfg;
    TrainResult score;

    Smoke() {
        ds = synthesize_dataset(n, geo, 10, 4, 42);
        mask = make_wedge_mask(geo, 60.0);
        train = make_sino_samples(ds, mask, scale, true);
        test = make_sino_samples(ds, mask, scale, false);
        score_cfg.iterations = 4000;
        score_cfg.batch_size = 4;
        score_cfg.lr = 1e-3;
        score_cfg.hidden_channels = 8;
        score_cfg.seed = 5;
        score = train_score(train, mask, sched, score_cfg);
    }
};

const Smoke& smoke() {
    static Smoke s;
    return s;
}

double window_mean(const std::vector<double>& v, size_t lo, size_t hi) {
    double s = 0.0;
    for (size_t i = lo; i < hi; ++i) s += v[i];
    return s / static_cast<double>(hi - lo);
}

double loss_ratio(const std::vector<double>& log, size_t window = 100) {
    const size_t w = std::min(window, log.size() / 2);
    return window_mean(log, log.size() - w, log.size()) / window_mean(log, 0, w);
}

}  // namespace

TEST_CASE("low_fidelity_inpaint interpolation contract") {
    ScanGeometry geo{30, 6.0, 46, 1.0};
    // full keep is the identity
    Rng rng(1);
    Grid s(30, 46);
    rng.fill_normal(s);
    REQUIRE(low_fidelity_inpaint(s, full_keep_mask(geo)).v == s.v);
    // single missing row between identical neighbors reproduces them
    AngleMask one = full_keep_mask(geo);
    one.kept[10] = 0;
    Grid t(30, 46, 0.0);
    for (int j = 0; j < 46; ++j) {
        t.at(9, j) = 0.7;
        t.at(11, j) = 0.7;
    }
    Grid filled = low_fidelity_inpaint(t, one);
    for (int j = 0; j < 46; ++j) REQUIRE(filled.at(10, j) == Catch::Approx(0.7).margin(1e-12));
    // all-missing mask is rejected
    AngleMask none = full_keep_mask(geo);
    std::fill(none.kept.begin(), none.kept.end(), 0);
    REQUIRE_THROWS(low_fidelity_inpaint(t, none));
}

TEST_CASE("low_fidelity_inpaint beats the zero fill on a smooth sinogram") {
    const Smoke& sm = smoke();
    const SinoSample& s = sm.train[0];
    REQUIRE(mse(s.lowfid, s.x0) < mse(s.mu, s.x0));
}

TEST_CASE("rectify_rnsd is a data-consistency projection") {
    const Smoke& sm = smoke();
    Rng rng(3);
    Grid x(30, 46), y(30, 46);
    rng.fill_normal(x);
    rng.fill_normal(y);
    for (int i = 0; i < 30; ++i)
        if (!sm.mask.kept[i])
            for (int j = 0; j < 46; ++j) y.at(i, j) = 0.0;
    Grid r = rectify_rnsd(x, y, sm.mask);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 46; ++j) {
            if (sm.mask.kept[i])
                REQUIRE(r.at(i, j) == y.at(i, j));
            else
                REQUIRE(r.at(i, j) == x.at(i, j));
        }
    // projection: applying twice changes nothing; consistent input is fixed
    REQUIRE(rectify_rnsd(r, y, sm.mask).v == r.v);
    Grid consistent = x;
    for (int i = 0; i < 30; ++i)
        if (sm.mask.kept[i])
            for (int j = 0; j < 46; ++j) consistent.at(i, j) = y.at(i, j);
    REQUIRE(rectify_rnsd(consistent, y, sm.mask).v == consistent.v);
}

TEST_CASE("score training memorizes a 10-sinogram set") {
    const Smoke& sm = smoke();
    const double ratio = loss_ratio(sm.score.loss_log);
    INFO("score loss ratio " << ratio);
    REQUIRE(ratio <= 0.1);
    REQUIRE(sm.score.params.all_finite());
    REQUIRE(static_cast<int>(sm.score.loss_log.size()) == sm.score_cfg.iterations);
}

TEST_CASE("score training is deterministic and rejects a degenerate schedule") {
    const Smoke& sm = smoke();
    TrainingConfig cfg = sm.score_cfg;
    cfg.iterations = 50;
    TrainResult a = train_score(sm.train, sm.mask, sm.sched, cfg);
    TrainResult b = train_score(sm.train, sm.mask, sm.sched, cfg);
    REQUIRE(a.loss_log == b.loss_log);
    NoiseSchedule bad = sm.sched;
    bad.lambda = 0.0;
    REQUIRE_THROWS(train_score(sm.train, sm.mask, bad, cfg));
}

TEST_CASE("checkpointed training resumes bit-exactly") {
    // The cosine schedule is a function of the configured horizon, so an
    // interrupted run only replays the straight run exactly when the learning
    // rate does not depend on it; pin lr_min = lr to isolate the actual
    // claim: optimizer state and per-step random streams survive the
    // round trip through the on-disk format.
    const Smoke& sm = smoke();
    TrainingConfig cfg = sm.score_cfg;
    cfg.iterations = 150;
    cfg.lr_min = cfg.lr;
    TrainResult straight = train_score(sm.train, sm.mask, sm.sched, cfg);

    TrainingConfig half = cfg;
    half.iterations = 100;
    TrainResult first = train_score(sm.train, sm.mask, sm.sched, half);
    // round-trip the interrupted state through the on-disk format
    Checkpoint ck;
    ck.spec = score_net_spec(cfg.hidden_channels);
    ck.params = first.params;
    Checkpoint back = checkpoint_from_container(deserialize_container(serialize(checkpoint_to_container(ck))));
    REQUIRE(back.params.step_count == 100);
    TrainResult second = train_score(sm.train, sm.mask, sm.sched, cfg, &back.params);
    REQUIRE(second.params.step_count == 150);
    for (size_t e = 0; e < straight.params.entries.size(); ++e) {
        REQUIRE(second.params.entries[e].value.data == straight.params.entries[e].value.data);
        REQUIRE(second.params.entries[e].m.data == straight.params.entries[e].m.data);
    }
    // loss trajectory continues exactly where it stopped
    REQUIRE(second.loss_log.size() == 50);
    for (size_t i = 0; i < 50; ++i) REQUIRE(second.loss_log[i] == straight.loss_log[100 + i]);
}

TEST_CASE("teacher restoration is deterministic and beats the interpolation fill") {
    const Smoke& sm = smoke();
    const NetSpec spec = score_net_spec(sm.score_cfg.hidden_channels);
    const SinoSample& s = sm.train[0];
    Grid a = teacher_restore_ode(sm.score.params, spec, sm.sched, s.mu, s.lowfid, 9001);
    Grid b = teacher_restore_ode(sm.score.params, spec, sm.sched, s.mu, s.lowfid, 9001);
    REQUIRE(a.v == b.v);
    Grid c = teacher_restore_ode(sm.score.params, spec, sm.sched, s.mu, s.lowfid, 9002);
    REQUIRE(a.v != c.v);
    // beats the zero fill outright and the interpolation fill on average
    // (measured 0.00078 vs 0.00161 over the 10 training sinograms; the
    // interpolation wins on a few individually easy samples)
    REQUIRE(mse(a, s.x0) < mse(s.mu, s.x0));
    double teacher_mse = 0.0, lowfid_mse = 0.0;
    for (size_t i = 0; i < sm.train.size(); ++i) {
        const SinoSample& t = sm.train[i];
        Grid r = teacher_restore_ode(sm.score.params, spec, sm.sched, t.mu, t.lowfid,
                                     9001 + static_cast<uint64_t>(i));
        teacher_mse += mse(r, t.x0);
        lowfid_mse += mse(t.lowfid, t.x0);
    }
    REQUIRE(teacher_mse < lowfid_mse);
}

TEST_CASE("generate_pairs replays deterministically") {
    const Smoke& sm = smoke();
    const NetSpec spec = score_net_spec(sm.score_cfg.hidden_channels);
    auto pairs = generate_pairs(sm.score.params, spec, sm.sched, sm.train, 25, 77);
    REQUIRE(pairs.size() == 25);
    // every stored restoration replays bit-identically from its terminal draw
    for (int i : {0, 7, 24}) {
        Grid again = teacher_restore_from(sm.score.params, spec, sm.sched, pairs[i].x_T,
                                          pairs[i].mu, low_fidelity_inpaint(pairs[i].mu, sm.mask));
        REQUIRE(again.v == pairs[i].x0_hat.v);
    }
    // terminal draws are centered on mu: mean deviation within 3 standard errors
    double dev = 0.0;
    size_t count = 0;
    for (const PairRecord& p : pairs) {
        for (size_t i = 0; i < p.x_T.v.size(); ++i) dev += p.x_T.v[i] - p.mu.v[i];
        count += p.x_T.v.size();
    }
    const double sd = marginal_params(sm.sched, sm.sched.T).std;
    REQUIRE(std::fabs(dev / count) <= 3.0 * sd / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("distillation halves the loss and contracts toward the teacher") {
    const Smoke& sm = smoke();
    const NetSpec sspec = score_net_spec(sm.score_cfg.hidden_channels);
    const NetSpec dspec = student_net_spec(8);
    auto pairs = generate_pairs(sm.score.params, sspec, sm.sched, sm.train, 40, 123);

    // zero-init student predicts a zero residual, restoration = x_T
    TrainingConfig dcfg;
    dcfg.iterations = 4000;
    dcfg.batch_size = 4;
    dcfg.lr = 1e-3;
    dcfg.hidden_channels = 8;
    dcfg.seed = 6;
    ModelParams fresh = init_params(dspec, Rng(dcfg.seed).derive(0));
    Grid r0 = student_predict(fresh, dspec, pairs[0].x_T, pairs[0].mu, pairs[0].lowfid);
    for (double v : r0.v) REQUIRE(v == 0.0);

    TrainResult student = distill_student(pairs, sm.mask, dcfg);
    const double ratio = loss_ratio(student.loss_log);
    INFO("distill loss ratio " << ratio);
    REQUIRE(ratio <= 0.5);

    // held-out contraction: the one-step restoration lands at least twice as
    // close to the teacher output (proxy distance) as the terminal draw
    auto held = generate_pairs(sm.score.params, sspec, sm.sched, sm.test, 8, 321);
    double num = 0.0, den = 0.0;
    for (const PairRecord& p : held) {
        Grid r_hat = student_predict(student.params, dspec, p.x_T, p.mu, p.lowfid);
        Grid rest = p.x_T - r_hat;
        num += perceptual_proxy(rest, p.x0_hat);
        den += perceptual_proxy(p.x_T, p.x0_hat);
    }
    INFO("contraction " << num / den);
    REQUIRE(num <= 0.5 * den);

    // residual identity: restoration + residual reassembles x_T (up to the
    // rounding of one subtraction/addition pair)
    Grid r = student_predict(student.params, dspec, pairs[0].x_T, pairs[0].mu, pairs[0].lowfid);
    Grid rest = pairs[0].x_T - r;
    Grid re = rest + r;
    for (size_t i = 0; i < re.v.size(); ++i)
        REQUIRE(std::fabs(re.v[i] - pairs[0].x_T.v[i]) <= 1e-12);

    // boundary term vanishes for an exact restoration
    Grid exact = rectify_rnsd(pairs[0].gt, pairs[0].mu, sm.mask);
    REQUIRE(perceptual_proxy(exact, rectify_rnsd(exact, pairs[0].mu, sm.mask)) == 0.0);

    // ensemble members agree bit-exactly on kept rows and vary in the wedge
    const SinoSample& s = sm.test[0];
    auto ens = ensemble_sample(student.params, dspec, sm.sched, s.mu, sm.mask, 6, 2024);
    REQUIRE(ens.size() == 6);
    for (int i = 0; i < 30; ++i)
        if (sm.mask.kept[i])
            for (int j = 0; j < 46; ++j)
                for (const Grid& m : ens) REQUIRE(m.at(i, j) == s.mu.at(i, j));
    Grid mean, stddev;
    ensemble_mean_std(ens, mean, stddev);
    double max_std = 0.0;
    for (int i = 0; i < 30; ++i)
        if (!sm.mask.kept[i])
            for (int j = 0; j < 46; ++j) max_std = std::max(max_std, stddev.at(i, j));
    REQUIRE(max_std > 0.0);
    // N = 1 equals a single rectified restoration built by hand
    auto one = ensemble_sample(student.params, dspec, sm.sched, s.mu, sm.mask, 1, 2024);
    Rng member = Rng(2024).derive(0xE45ULL);
    Grid lowfid = low_fidelity_inpaint(s.mu, sm.mask);
    Grid x_T = sample_terminal(sm.sched, s.mu, member);
    Grid manual = rectify_rnsd(x_T - student_predict(student.params, dspec, x_T, s.mu, lowfid),
                               s.mu, sm.mask);
    REQUIRE(one[0].v == manual.v);

    // ---- post-processing stage on the same artifacts ----
    std::vector<PostprocSample> ps;
    for (int i = 0; i < sm.ds.num_train; ++i)
        ps.push_back(make_postproc_sample(student.params, dspec, sm.sched, sm.ds.train_item(i),
                                          sm.mask, sm.scale, 4, 500 + i));
    TrainingConfig pcfg;
    pcfg.iterations = 1500;
    pcfg.batch_size = 4;
    pcfg.lr = 1e-3;
    pcfg.hidden_channels = 8;
    pcfg.seed = 7;
    // zero-init refinement head outputs zero
    ModelParams tau0 = init_params(postproc_net_spec(8), Rng(7).derive(0));
    Grid z = postproc_refine(tau0, postproc_net_spec(8), ps[0].fbp_mean, ps[0].fbp_std);
    for (double v : z.v) REQUIRE(v == 0.0);

    TrainResult tau = train_postproc(ps, pcfg);
    const double pratio = loss_ratio(tau.loss_log);
    INFO("postproc loss ratio " << pratio);
    REQUIRE(pratio <= 0.5);
    // refinement improves on its own input on the training set
    double ref_db = 0.0, in_db = 0.0;
    for (const PostprocSample& sp : ps) {
        Image out = postproc_refine(tau.params, postproc_net_spec(8), sp.fbp_mean, sp.fbp_std);
        clip01(out);
        Image base = sp.fbp_mean;
        clip01(base);
        ref_db += psnr(out, sp.gt);
        in_db += psnr(base, sp.gt);
    }
    INFO("refined " << ref_db / ps.size() << " dB vs input " << in_db / ps.size() << " dB");
    REQUIRE(ref_db > in_db);

    // ---- end-to-end restoration ----
    const DatasetItem& item = sm.ds.test_item(0);
    RestoreResult ra = full_restore(student.params, dspec, tau.params, postproc_net_spec(8),
                                    sm.sched, item.sino, sm.mask, sm.n, sm.scale, 4, 31337);
    RestoreResult rb = full_restore(student.params, dspec, tau.params, postproc_net_spec(8),
                                    sm.sched, item.sino, sm.mask, sm.n, sm.scale, 4, 31337);
    REQUIRE(ra.refined.v == rb.refined.v);
    REQUIRE(ra.fbp_std.v == rb.fbp_std.v);
    // every exported sinogram is data-consistent with the observation
    Sinogram obs = apply_mask(item.sino, sm.mask);
    REQUIRE(ra.inpainted.size() == 4);
    for (const Sinogram& sino : ra.inpainted)
        for (int i = 0; i < 30; ++i)
            if (sm.mask.kept[i])
                for (int j = 0; j < 46; ++j) REQUIRE(sino.data.at(i, j) == obs.data.at(i, j));
    for (double v : ra.refined.v) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("postproc std channel is zero for a deterministic ensemble") {
    std::vector<Image> members(5, Image(8, 8, 0.3));
    Image mean, stddev;
    ensemble_mean_std(members, mean, stddev);
    for (double v : mean.v) REQUIRE(v == Catch::Approx(0.3).margin(1e-12));
    // summation rounding leaves a ~1e-17 residual, not an exact zero
    for (double v : stddev.v) REQUIRE(std::fabs(v) <= 1e-12);
    // two-member hand check: mean 0.5, unbiased std = |a-b| / sqrt(2)
    std::vector<Image> two{Image(8, 8, 0.2), Image(8, 8, 0.8)};
    ensemble_mean_std(two, mean, stddev);
    for (double v : mean.v) REQUIRE(v == Catch::Approx(0.5).epsilon(1e-12));
    for (double v : stddev.v)
        REQUIRE(v == Catch::Approx(0.6 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("direct MSE inpainter trains and fills the wedge") {
    const Smoke& sm = smoke();
    TrainingConfig cfg;
    cfg.iterations = 1500;
    cfg.batch_size = 4;
    cfg.lr = 1e-3;
    cfg.hidden_channels = 8;
    cfg.seed = 8;
    TrainResult mi = train_mse_inpainter(sm.train, cfg);
    REQUIRE(loss_ratio(mi.loss_log) <= 0.5);
    const SinoSample& s = sm.train[0];
    Grid pred = mse_inpaint_predict(mi.params, mse_net_spec(8), s.mu, sm.mask);
    REQUIRE(mse(pred, s.x0) < mse(s.lowfid, s.x0));
}
