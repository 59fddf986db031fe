// regionlens command-line front end: scene generation, training, gradient
// checks, benchmarks, ablations and grounded-transcript validation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "regionlens/experiments.hpp"

namespace fs = std::filesystem;
using namespace regionlens;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> stage1_steps, stage2_steps, train_scenes, eval_scenes;
    std::optional<double> stage1_lr, stage2_lr, tau, rejection_fraction, jitter, drop_rate, clutter_rate;
    std::optional<int> d_llm, fp_channels;
    std::optional<bool> use_primary, use_auxiliary, use_simplefp, unfreeze_primary, unfreeze_aux_stage2;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config_path, "JSON experiment config");
        app->add_option("--seed", seed);
        app->add_option("--stage1-steps", stage1_steps);
        app->add_option("--stage1-lr", stage1_lr);
        app->add_option("--stage2-steps", stage2_steps);
        app->add_option("--stage2-lr", stage2_lr);
        app->add_option("--train-scenes", train_scenes);
        app->add_option("--eval-scenes", eval_scenes);
        app->add_option("--tau", tau);
        app->add_option("--rejection-fraction", rejection_fraction);
        app->add_option("--jitter", jitter, "proposal coordinate noise std");
        app->add_option("--drop-rate", drop_rate);
        app->add_option("--clutter-rate", clutter_rate);
        app->add_option("--d-llm", d_llm);
        app->add_option("--fp-channels", fp_channels);
        app->add_option("--use-primary", use_primary);
        app->add_option("--use-auxiliary", use_auxiliary);
        app->add_option("--use-simplefp", use_simplefp);
        app->add_option("--unfreeze-primary", unfreeze_primary);
        app->add_option("--unfreeze-aux-stage2", unfreeze_aux_stage2);
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw std::runtime_error("cannot open config " + config_path);
            c = nlohmann::json::parse(in).get<ExperimentConfig>();
        }
        if (seed) c.seed = *seed;
        if (stage1_steps) c.stage1_steps = *stage1_steps;
        if (stage1_lr) c.stage1_lr = *stage1_lr;
        if (stage2_steps) c.stage2_steps = *stage2_steps;
        if (stage2_lr) c.stage2_lr = *stage2_lr;
        if (train_scenes) c.train_scenes = *train_scenes;
        if (eval_scenes) c.eval_scenes = *eval_scenes;
        if (tau) c.tau = *tau;
        if (rejection_fraction) c.rejection_fraction = *rejection_fraction;
        if (jitter) c.opn.jitter_sigma = *jitter;
        if (drop_rate) c.opn.drop_rate = *drop_rate;
        if (clutter_rate) c.opn.clutter_rate = *clutter_rate;
        if (d_llm) c.model.d_llm = *d_llm;
        if (fp_channels) c.model.fp_channels = *fp_channels;
        if (use_primary) c.model.use_primary = *use_primary;
        if (use_auxiliary) c.model.use_auxiliary = *use_auxiliary;
        if (use_simplefp) c.model.use_simplefp = *use_simplefp;
        if (unfreeze_primary) c.unfreeze_primary = *unfreeze_primary;
        if (unfreeze_aux_stage2) c.unfreeze_aux_stage2 = *unfreeze_aux_stage2;
        c.validate();
        return c;
    }
};

std::string file_checksum(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    return hex64(fnv1a({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()}));
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(1) + "\n"); }

// manifest.json: command, seeds and an FNV-1a checksum for every artifact.
void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& files, nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json m{{"command", command}, {"seeds", seeds}, {"files", nlohmann::json::object()}};
    for (const std::string& f : files) m["files"][f] = file_checksum(dir / f);
    for (auto& [k, v] : extra.items()) m[k] = v;
    write_json(dir / "manifest.json", m);
}

int cmd_gen(const Overrides& o, const std::string& out, int n) {
    const ExperimentConfig cfg = o.resolve();
    fs::create_directories(out);
    const EvalSet set = make_eval_set(cfg, n, cfg.opn);
    write_json(fs::path(out) / "scenes.json", scenes_to_json(set.scenes, set.proposals));
    write_json(fs::path(out) / "config.json", cfg);
    write_manifest(out, "gen", {cfg.seed}, {"scenes.json", "config.json"});
    std::printf("wrote %d scenes to %s\n", n, out.c_str());
    return 0;
}

int cmd_train(const Overrides& o, const std::string& out, bool with_baseline) {
    const ExperimentConfig cfg = o.resolve();
    fs::create_directories(out);
    const TrainResult r = train(cfg, with_baseline);
    r.bundle.save((fs::path(out) / "bundle.json").string());
    write_json(fs::path(out) / "train_log.json", r.log.to_json());
    write_json(fs::path(out) / "config.json", cfg);
    write_manifest(out, "train", {cfg.seed}, {"bundle.json", "train_log.json", "config.json"},
                   {{"group_checksums", group_checksums(r.bundle.params)}});
    const auto& l1 = r.log.stage1_loss;
    const auto& l2 = r.log.stage2_loss;
    std::printf("stage1 steps %zu first loss %.4f last loss %.4f\n", l1.size(), l1.empty() ? 0.0 : l1.front(),
                l1.empty() ? 0.0 : l1.back());
    std::printf("stage2 steps %zu last loss %.4f\n", l2.size(), l2.empty() ? 0.0 : l2.back());
    std::printf("bundle written to %s\n", (fs::path(out) / "bundle.json").c_str());
    return 0;
}

int cmd_gradcheck(const Overrides& o, const std::string& out, int stage, int coords) {
    const GradCheckReport rep = grad_check(o.resolve(), stage, coords);
    for (const GroupCheck& g : rep.groups) {
        std::printf("%-16s %-9s coords %4d rel_err %.3e |g| %.3e\n", g.group.c_str(),
                    g.trainable ? "trainable" : "frozen", g.coords_checked, g.max_rel_error, g.analytic_norm);
    }
    std::printf("max_rel_error %.3e frozen_groups_zero %s\n", rep.max_rel_error, rep.frozen_groups_zero ? "yes" : "no");
    if (!out.empty()) {
        fs::create_directories(out);
        write_json(fs::path(out) / "gradcheck.json", rep.to_json());
        write_manifest(out, "gradcheck", {o.resolve().seed}, {"gradcheck.json"});
    }
    return rep.max_rel_error < 1e-4 && rep.frozen_groups_zero ? 0 : 1;
}

int cmd_bench(const std::string& bundle_path, const std::string& out) {
    if (!fs::exists(bundle_path)) throw std::runtime_error("missing bundle: " + bundle_path);
    const TrainedBundle bundle = TrainedBundle::load(bundle_path);
    const BenchmarkResult r = run_benchmark(bundle);
    fs::create_directories(out);
    write_json(fs::path(out) / "bench.json", r.to_json());
    write_text(fs::path(out) / "bench.tsv", r.tsv());
    write_manifest(out, "bench", {bundle.config.seed}, {"bench.json", "bench.tsv"},
                   {{"bundle", bundle_path}, {"bundle_checksum", file_checksum(bundle_path)}});
    std::printf("%s", r.tsv().c_str());
    std::printf("rejection_fp_rate\t%.4f\ncounting_accuracy\t%.4f\n", r.rejection_fp_rate, r.counting_accuracy);
    return 0;
}

int cmd_ablate(const Overrides& o, const std::string& out, const std::vector<std::uint64_t>& seeds) {
    const ExperimentConfig cfg = o.resolve();
    const auto rows = run_ablations(cfg, seeds);
    fs::create_directories(out);
    write_json(fs::path(out) / "ablations.json", ablations_to_json(rows));
    write_text(fs::path(out) / "ablations.tsv", ablations_tsv(rows));
    write_json(fs::path(out) / "config.json", cfg);
    write_manifest(out, "ablate", seeds, {"ablations.json", "ablations.tsv", "config.json"});
    std::printf("%s", ablations_tsv(rows).c_str());
    return 0;
}

// Each input line is one JSON string literal holding a grounded response.
int cmd_validate(const std::string& path, int n_regions) {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (!path.empty() && path != "-") {
        file.open(path);
        if (!file) throw std::runtime_error("cannot open " + path);
        in = &file;
    }
    std::string line;
    int lineno = 0, bad = 0;
    while (std::getline(*in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::string text;
        try {
            text = nlohmann::json::parse(line).get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            std::printf("%d\tERROR\tline is not a JSON string: %s\n", lineno, e.what());
            ++bad;
            continue;
        }
        try {
            const GroundedResponse r = parse_grounded(text, n_regions);
            std::printf("%d\tOK\t%zu spans\n", lineno, bindings(r).size());
        } catch (const GrammarError& e) {
            std::printf("%d\tERROR\toffset %zu\t%s\t%s\n", lineno, e.offset(), e.production().c_str(), e.what());
            ++bad;
        }
    }
    return bad == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regionlens: region-retrieval perception experiments on synthetic scenes"};
    app.require_subcommand(1);

    Overrides gen_o, train_o, grad_o, abl_o;
    std::string gen_out = "out/gen", train_out = "out/train", grad_out, bench_out = "out/bench", abl_out = "out/ablate";
    int gen_n = 100, grad_stage = 2, grad_coords = 12, n_regions = 100;
    bool no_baseline = false;
    std::string bundle_path, transcript;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

    CLI::App* gen = app.add_subcommand("gen", "generate seeded scenes and proposals");
    gen_o.attach(gen);
    gen->add_option("-o,--out", gen_out);
    gen->add_option("-n,--n-scenes", gen_n)->check(CLI::PositiveNumber);

    CLI::App* tr = app.add_subcommand("train", "two-stage training of the retrieval head (and the baseline)");
    train_o.attach(tr);
    tr->add_option("-o,--out", train_out);
    tr->add_flag("--no-baseline", no_baseline);

    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    grad_o.attach(gc);
    gc->add_option("-o,--out", grad_out);
    gc->add_option("--stage", grad_stage)->check(CLI::IsMember({1, 2}));
    gc->add_option("--coords", grad_coords, "sampled coordinates per tensor")->check(CLI::PositiveNumber);

    CLI::App* bench = app.add_subcommand("bench", "evaluate a trained bundle against its baseline");
    bench->add_option("-b,--bundle", bundle_path)->required();
    bench->add_option("-o,--out", bench_out);

    CLI::App* abl = app.add_subcommand("ablate", "hybrid / primary-only / auxiliary-only and SimpleFP ablations");
    abl_o.attach(abl);
    abl->add_option("-o,--out", abl_out);
    abl->add_option("--seeds", seeds);

    CLI::App* val = app.add_subcommand("validate-transcript", "check grounded responses, one JSON string per line");
    val->add_option("file", transcript, "input file, '-' or omitted for stdin");
    val->add_option("--n-regions", n_regions)->check(CLI::NonNegativeNumber);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) return cmd_gen(gen_o, gen_out, gen_n);
        if (*tr) return cmd_train(train_o, train_out, !no_baseline);
        if (*gc) return cmd_gradcheck(grad_o, grad_out, grad_stage, grad_coords);
        if (*bench) return cmd_bench(bundle_path, bench_out);
        if (*abl) return cmd_ablate(abl_o, abl_out, seeds);
        if (*val) return cmd_validate(transcript, n_regions);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
