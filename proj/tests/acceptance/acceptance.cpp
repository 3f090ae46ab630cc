// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "actguard/artifacts.hpp"
#include "actguard/detector.hpp"
#include "actguard/harness.hpp"
#include "gradcheck.hpp"

using namespace actguard;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [violated: " << what << "]";
        }
    }
};

int failures = 0;

void report(int id, const std::string& name, Verdict& v) {
    std::printf("criterion %2d %-28s %s%s\n", id, name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.str().c_str());
    std::fflush(stdout);
    failures += !v.pass;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("actguard_accept_" + name); }

ExperimentConfig base_config(TriggerKind kind) {
    ExperimentConfig c;
    c.poison.kind = kind;
    c.seed = 0;
    c.out_dir = scratch(to_string(kind));
    return c;
}

struct Run {
    ExperimentState state;
    EvalReport report;
    double seconds = 0.0;
};

Run run(const ExperimentConfig& cfg, const std::string& label) {
    const auto t0 = Clock::now();
    Run r{run_pipeline(cfg), {}, 0.0};
    r.report = evaluate(r.state);
    r.seconds = seconds_since(t0);
    const EvalReport& e = r.report;
    std::printf("  run %-14s %5.0fs  undefended cacc %.2f asr %.2f pacc %.2f | defended cacc %.2f asr %.2f pacc %.2f | "
                "auroc %.2f baseline %.2f%s\n",
                label.c_str(), r.seconds, e.undefended_cacc, e.undefended_asr, e.undefended_pacc, e.cacc, e.asr, e.pacc,
                e.auroc, e.baseline_auroc, r.state.constraint_failed ? " (detection-only fallback)" : "");
    std::fflush(stdout);
    return r;
}

bool bit_equal(std::span<const float> a, std::span<const float> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

void gradients() {
    Verdict v;
    const auto t0 = Clock::now();
    std::vector<gradcheck::Case> cases;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        for (auto& c : gradcheck::make_cases(seed)) cases.push_back(std::move(c));
        cases.push_back(gradcheck::model_case(seed));
        cases.push_back(gradcheck::bounded_case(seed, ClampScope::ClassToken));
        cases.push_back(gradcheck::bounded_case(seed, ClampScope::AllTokens));
    }
    double worst = 0.0;
    std::string worst_name;
    std::size_t graphs = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const gradcheck::Outcome o = gradcheck::check(cases[i], 1000 + i);
        graphs += o.checked > 0;
        if (o.max_rel_error > worst) {
            worst = o.max_rel_error;
            worst_name = o.name;
        }
    }
    const double secs = seconds_since(t0);
    v.detail << " graphs=" << graphs << " worst_rel=" << worst << " (" << worst_name << ") time=" << secs << "s";
    v.require(graphs >= 50, "at least 50 graphs");
    v.require(worst <= 1e-3, "relative error <= 1e-3");
    v.require(secs < 120.0, "runtime < 2 min");
    report(1, "gradient correctness", v);
}

void three_sigma(const GaussianStats& stats) {
    Verdict v;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 1.0);
    double total = 0.0;
    for (int draw = 0; draw < 1000; ++draw) {
        ActivationTrace t{stats.layers, stats.width, std::vector<float>(stats.mu.size())};
        for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = float(stats.mu[i] + stats.sigma[i] * g(rng));
        total += nas_score(t, stats, 3.0);
    }
    const double mean = total / 1000.0;
    v.detail << " mean_nas=" << mean;
    v.require(std::abs(mean - 0.9973) <= 0.003, "0.9973 +- 0.003");
    report(6, "three-sigma coverage", v);
}

void oracles() {
    Verdict v;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> level(0, 12);
    std::size_t auroc_mismatch = 0, rank_mismatch = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> clean(10 + trial % 23), poison(5 + trial % 17);
        for (auto& x : clean) x = trial % 2 ? u(rng) : level(rng) / 12.0;
        for (auto& x : poison) x = trial % 2 ? u(rng) * 0.9 : level(rng) / 12.0;
        double wins = 0.0;
        for (double p : poison) {
            for (double c : clean) wins += p < c ? 1.0 : (p == c ? 0.5 : 0.0);
        }
        auroc_mismatch += auroc(clean, poison) != wins / (double(clean.size()) * double(poison.size()));

        const double a = u(rng) * 100.0;
        std::vector<double> sorted = clean;
        std::sort(sorted.begin(), sorted.end());
        const auto rank = std::max<std::size_t>(1, std::size_t(std::ceil(a * double(clean.size()) / 100.0)));
        rank_mismatch += calibrate_threshold(clean, a) != sorted[rank - 1];
    }
    double stats_err = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 r(seed);
        std::normal_distribution<float> g(0.0f, 1.0f);
        std::vector<ActivationTrace> traces(60, ActivationTrace{2, 16, std::vector<float>(32)});
        for (auto& t : traces) {
            for (std::size_t i = 0; i < 32; ++i) t.values[i] = 0.5f * float(i) - 4.0f + (0.2f + 0.1f * float(i)) * g(r);
        }
        const GaussianStats s = fit_gaussian_stats(traces);
        for (std::size_t i = 0; i < 32; ++i) {
            double mean = 0.0;
            for (const auto& t : traces) mean += t.values[i];
            mean /= double(traces.size());
            double ss = 0.0;
            for (const auto& t : traces) ss += (t.values[i] - mean) * (t.values[i] - mean);
            const double sd = std::sqrt(ss / double(traces.size() - 1));
            stats_err = std::max(stats_err, std::abs(s.mu[i] - mean) / std::max(1.0, std::abs(mean)));
            stats_err = std::max(stats_err, std::abs(s.sigma[i] - sd) / std::max(1.0, sd));
        }
    }
    v.detail << " auroc_mismatch=" << auroc_mismatch << "/100 percentile_mismatch=" << rank_mismatch
             << "/100 stats_rel_err=" << stats_err;
    v.require(auroc_mismatch == 0, "auroc equals all-pairs counting");
    v.require(rank_mismatch == 0, "percentile equals sort-and-index");
    v.require(stats_err <= 1e-6, "stats within 1e-6");
    report(9, "oracle equivalences", v);
}

void contracts(const std::vector<const ExperimentState*>& states) {
    Verdict v;
    std::size_t returns = 0;
    for (const ExperimentState* s : states) {
        if (!s->purification) continue;
        ++returns;
        v.require(s->purification->validation_accuracy >= s->purification->pi, "validation accuracy >= pi");
    }

    ExperimentConfig cfg;
    cfg.dataset.sizes = {400, 120, 120};
    cfg.model.hidden_dim = 16;
    cfg.model.head_count = 2;
    cfg.model.max_sequence_length = 24;
    cfg.train.epochs = 3;
    cfg.train.learning_rate = 2e-3f;
    cfg.purifier.steps = 60;
    cfg.purifier.learning_rate = 5e-2f;
    cfg.seed = 11;
    cfg.out_dir = scratch("determinism");
    const char* files[] = {"report.json", "checkpoint.json", "vocab.json", "stats.json",
                           "bounds.json", "bundle.json", "scores.csv", "config.json"};
    std::map<std::string, std::string> first;
    bool identical = true;
    for (int pass = 0; pass < 2; ++pass) {
        const EvalReport r = run_experiment(cfg);
        for (const char* f : files) {
            if (!fs::exists(cfg.out_dir / f)) continue;
            const std::string text = read_file(cfg.out_dir / f);
            if (pass == 0) {
                first[f] = text;
            } else {
                identical = identical && first[f] == text;
            }
        }
        (void)r;
    }
    v.require(identical, "byte-identical artifacts");

    // Optimize again on the small run and round-trip every artifact.
    const ExperimentState s = run_pipeline(cfg);
    if (s.purification) {
        ++returns;
        v.require(s.purification->validation_accuracy >= s.purification->pi, "validation accuracy >= pi");
    }
    bool round_trip = true;
    const fs::path dir = scratch("roundtrip");
    save_checkpoint(*s.model, dir / "c.json");
    const TransformerClassifier back = load_checkpoint(dir / "c.json");
    for (std::size_t i = 0; i < s.model->named_parameters().size(); ++i) {
        round_trip = round_trip && bit_equal(back.named_parameters()[i].second.data(),
                                             s.model->named_parameters()[i].second.data());
    }
    const StatsFile sf = stats_from_json(parse_json(dump_json(stats_to_json(s.stats, s.detector))));
    round_trip = round_trip && bit_equal(sf.stats.mu, s.stats.mu) && bit_equal(sf.stats.sigma, s.stats.sigma) &&
                 sf.detector.threshold_lambda == s.detector.threshold_lambda;
    const BoundsFile bf = bounds_from_json(parse_json(dump_json(bounds_to_json(s.bounds, 0.5, 1e-3))));
    round_trip = round_trip && bit_equal(bf.bounds.z_low, s.bounds.z_low) && bit_equal(bf.bounds.z_up, s.bounds.z_up);
    const Vocabulary vb = vocab_from_json(vocab_to_json(s.vocab));
    round_trip = round_trip && vb.tokens() == s.vocab.tokens();
    v.require(round_trip, "bit-exact round trips");
    fs::remove_all(dir);
    fs::remove_all(cfg.out_dir);

    v.detail << " optimize_returns=" << returns << " byte_identical=" << (identical ? "yes" : "no")
             << " round_trip=" << (round_trip ? "bit-exact" : "mismatch");
    report(10, "constraint and determinism", v);
}

}  // namespace

int main() {
    gradients();
    oracles();

    ExperimentConfig clean_cfg = base_config(TriggerKind::BadnetsInsert);
    clean_cfg.poison.rate = 0.0;
    clean_cfg.out_dir = scratch("clean");
    const Run clean = run(clean_cfg, "clean twin");

    std::map<TriggerKind, Run> runs;
    for (TriggerKind kind : {TriggerKind::BadnetsInsert, TriggerKind::AddsentInsert, TriggerKind::ReverseProxy,
                             TriggerKind::CharsubProxy}) {
        runs.emplace(kind, run(base_config(kind), to_string(kind)));
    }
    const Run& badnets = runs.at(TriggerKind::BadnetsInsert);

    {
        Verdict v;
        for (TriggerKind kind : {TriggerKind::BadnetsInsert, TriggerKind::AddsentInsert}) {
            const Run& r = runs.at(kind);
            const double gap = std::abs(r.report.undefended_cacc - clean.report.undefended_cacc);
            v.detail << " " << to_string(kind) << ": cacc_gap=" << gap << " asr=" << r.report.undefended_asr
                     << " time=" << r.seconds << "s";
            v.require(gap <= 5.0, to_string(kind) + " cacc within 5 points of the clean twin");
            v.require(r.report.undefended_asr >= 90.0, to_string(kind) + " asr >= 90");
            v.require(r.seconds < 600.0, to_string(kind) + " runtime < 10 min");
        }
        report(2, "attack efficacy", v);
    }

    {
        Verdict v;
        for (const auto& [kind, r] : runs) {
            const bool insertion = kind == TriggerKind::BadnetsInsert || kind == TriggerKind::AddsentInsert;
            const double floor = insertion ? 90.0 : 75.0;
            v.detail << " " << to_string(kind) << ": nas=" << r.report.auroc << " baseline=" << r.report.baseline_auroc;
            v.require(r.report.auroc >= floor, to_string(kind) + " nas auroc >= " + std::to_string(int(floor)));
            v.require(r.report.auroc >= r.report.baseline_auroc - 2.0, to_string(kind) + " nas >= baseline - 0.02");
        }
        report(3, "detection", v);
    }

    {
        Verdict v;
        for (const auto& [kind, r] : runs) {
            const bool insertion = kind == TriggerKind::BadnetsInsert || kind == TriggerKind::AddsentInsert;
            const double needed = insertion ? 60.0 : 30.0;
            const double drop = r.report.undefended_asr - r.report.asr;
            const double cacc_drop = r.report.undefended_cacc - r.report.cacc;
            v.detail << " " << to_string(kind) << ": asr_drop=" << drop << " cacc_drop=" << cacc_drop;
            v.require(drop >= needed, to_string(kind) + " asr reduction >= " + std::to_string(int(needed)));
            v.require(cacc_drop <= 3.0, to_string(kind) + " cacc drop <= 3");
            v.require(r.report.asr + r.report.pacc == 100.0, to_string(kind) + " asr + pacc == 100");
            v.require(r.report.undefended_asr + r.report.undefended_pacc == 100.0,
                      to_string(kind) + " undefended asr + pacc == 100");
        }
        report(4, "purification", v);
    }

    {
        Verdict v;
        const auto rows = sweep(badnets.state, SweepAxis::FrrPercent, {10.0, 20.0, 30.0, 40.0, std::nullopt});
        for (std::size_t i = 0; i < rows.size(); ++i) {
            v.detail << " " << (rows[i].value ? std::to_string(int(*rows[i].value)) : std::string("none")) << ":"
                     << rows[i].report.cacc << "/" << rows[i].report.asr;
            if (i > 0) {
                v.require(rows[i].report.cacc <= rows[i - 1].report.cacc, "cacc non-increasing");
                v.require(rows[i].report.asr <= rows[i - 1].report.asr, "asr non-increasing");
            }
        }
        for (const auto& row : rows) {
            v.require(rows.back().report.cacc <= row.report.cacc, "no-detection row has minimum cacc");
            v.require(rows.back().report.asr <= row.report.asr, "no-detection row has minimum asr");
        }
        report(5, "frr trade-off trend", v);
    }

    three_sigma(badnets.state.stats);

    {
        Verdict v;
        const auto rows = sweep(badnets.state, SweepAxis::K, {2.0, 3.0, 4.0, 5.0});
        std::map<int, double> a;
        for (const auto& row : rows) a[int(*row.value)] = row.report.auroc;
        v.detail << " k2=" << a[2] << " k3=" << a[3] << " k4=" << a[4] << " k5=" << a[5];
        v.require(a[3] > a[5], "auroc(k3) > auroc(k5)");
        v.require(a[4] > a[5], "auroc(k4) > auroc(k5)");
        v.require(a[3] >= a[2], "auroc(k3) >= auroc(k2)");
        report(7, "k-ablation shape", v);
    }

    ExperimentConfig adaptive_cfg = base_config(TriggerKind::BadnetsInsert);
    adaptive_cfg.train.adaptive = true;
    adaptive_cfg.train.adapt_reg_lambda = 250.0f;
    adaptive_cfg.out_dir = scratch("adaptive");
    const Run adaptive = run(adaptive_cfg, "adaptive");
    {
        Verdict v;
        v.detail << " adaptive_pacc=" << adaptive.report.pacc << " plain_pacc=" << badnets.report.pacc
                 << " adaptive_undefended_pacc=" << adaptive.report.undefended_pacc;
        v.require(adaptive.report.pacc < badnets.report.pacc, "pacc drops relative to the non-adaptive run");
        v.require(adaptive.report.pacc >= adaptive.report.undefended_pacc + 25.0, "pacc >= undefended + 25");
        report(8, "adaptive attack", v);
    }

    std::vector<const ExperimentState*> states{&clean.state, &adaptive.state};
    for (const auto& [kind, r] : runs) states.push_back(&r.state);
    contracts(states);

    for (const auto& p : {scratch("clean"), scratch("adaptive")}) fs::remove_all(p);
    for (const auto& [kind, r] : runs) fs::remove_all(r.state.config.out_dir);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
