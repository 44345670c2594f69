// aoft: orthogonal-factor generation, geometry diagnostics, and desk-scale
// fine-tuning experiments from one binary.
//
// Seed handling: every subcommand takes a single --seed; internal consumers
// derive sub-seeds as seed * <odd constant> + index, so runs with the same
// flags are byte-identical (wall time lives only in JSON metadata fields).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "aoft/aoft_core.hpp"
#include "aoft/diagnostics.hpp"
#include "aoft/linalg.hpp"
#include "aoft/mtx_io.hpp"
#include "aoft/model.hpp"
#include "aoft/peft.hpp"
#include "aoft/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace aoft;

namespace {

std::string default_out_dir(const std::string &subcommand) {
    const char *base_env = std::getenv("AOFT_OUT_DIR");
    const std::string base = base_env ? base_env : "out";
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    return (fs::path(base) / subcommand / std::to_string(ms)).string();
}

std::string resolve_out(std::string &out_flag, const std::string &subcommand) {
    if (out_flag.empty()) out_flag = default_out_dir(subcommand);
    fs::create_directories(out_flag);
    return out_flag;
}

GeneratorVector random_generator(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    GeneratorVector g;
    g.q.resize(n);
    do {
        for (double &v : g.q) v = gauss(rng);
    } while (1.0 + g.q[0] <= kPoleEps);
    return g;
}

NormReport factors_norm_report(const FinetuneEngine &engine) {
    NormReport report;
    for (const auto &nm : engine.adapter_factors()) {
        std::size_t layer = 0;
        if (nm.name.size() > 1 && nm.name[0] == 'L')
            layer = std::strtoul(nm.name.c_str() + 1, nullptr, 10);
        report.rows.push_back(norm_row(layer, nm.name, nm.value));
    }
    return report;
}

int cmd_gen_ortho(std::size_t n, std::size_t d, std::uint64_t seed, bool strict,
                  std::string out) {
    GeneratorVector g = random_generator(n, seed);
    if (strict) g = normalize_strict(g);
    OrthoFactor f = build_ortho(g, d);
    resolve_out(out, "gen-ortho");
    Matrix q_col(n, 1);
    q_col.data = g.q;
    write_mtx((fs::path(out) / "generator.mtx").string(), q_col);
    write_mtx((fs::path(out) / "factor.mtx").string(), f.factor);
    std::printf("n=%zu d=%zu source_norm=%.17g deviation=%.17g\n", n, d,
                f.source_norm, f.deviation);
    std::printf("wrote %s\n", out.c_str());
    if (!std::isfinite(f.deviation)) return 2;
    return 0;
}

int cmd_grad_check(std::size_t n, std::size_t d, std::size_t trials,
                   std::uint64_t seed) {
    const double h = 1e-6;
    double max_rel = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        GeneratorVector g = random_generator(n, seed * 0x100000001b3ull + t);
        std::mt19937_64 rng(seed * 0xd6e8feb86659fd93ull + t);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Matrix upstream(n, d);
        for (double &v : upstream.data) v = gauss(rng);

        Vector analytic = grad_q(g, d, upstream);
        auto objective = [&](const GeneratorVector &gg) {
            Matrix f = build_ortho(gg, d).factor;
            double s = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i) s += f.data[i] * upstream.data[i];
            return s;
        };
        for (std::size_t k = 0; k < n; ++k) {
            GeneratorVector gp = g, gm = g;
            gp.q[k] += h;
            gm.q[k] -= h;
            const double fd = (objective(gp) - objective(gm)) / (2.0 * h);
            const double denom = std::max({std::abs(analytic[k]), std::abs(fd), 1e-8});
            max_rel = std::max(max_rel, std::abs(analytic[k] - fd) / denom);
        }
    }
    std::printf("grad-check n=%zu d=%zu trials=%zu max_rel_err=%.3e\n", n, d,
                trials, max_rel);
    return max_rel <= 1e-6 ? 0 : 2;
}

int cmd_analyze_angles(const std::string &input, double bin_width,
                       std::string out) {
    Matrix m = read_mtx(input);
    AngleHistogram h = angle_histogram(m, bin_width, fs::path(input).filename().string());
    resolve_out(out, "analyze-angles");
    write_histogram_csv((fs::path(out) / "angles.csv").string(), h);
    std::printf("pairs=%zu mean=%.6f std=%.6f\n", h.pairs, h.mean, h.stddev);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_analyze_norms(const std::string &checkpoint, std::string out) {
    std::ifstream mf(fs::path(checkpoint) / "manifest.json");
    if (!mf) throw std::invalid_argument("no manifest.json in " + checkpoint);
    nlohmann::json manifest = nlohmann::json::parse(mf);
    const std::string kind = manifest.value("kind", "");

    NormReport report;
    if (kind == "vit-checkpoint") {
        VitModel model = load_model(checkpoint);
        for (std::size_t l = 0; l < model.cfg.layers; ++l) {
            const auto &lay = model.layers[l];
            report.rows.push_back(norm_row(l, "wq", lay.wq));
            report.rows.push_back(norm_row(l, "wk", lay.wk));
            report.rows.push_back(norm_row(l, "wv", lay.wv));
            report.rows.push_back(norm_row(l, "wo", lay.wo));
            report.rows.push_back(norm_row(l, "fc1", lay.fc1));
            report.rows.push_back(norm_row(l, "fc2", lay.fc2));
        }
        report.rows.push_back(norm_row(0, "head_w", model.head_w));
    } else if (kind == "adapter-checkpoint") {
        const std::size_t d = manifest.at("bottleneck");
        for (const auto &item : manifest.at("pieces")) {
            const std::size_t layer = item.at("layer");
            const std::string target = item.at("target");
            auto factor_of = [&](const char *role) {
                Matrix q = read_mtx(
                    (fs::path(checkpoint) / item.at(role).get<std::string>()).string());
                GeneratorVector g{q.data};
                return build_ortho(g, d).factor;
            };
            if (item.contains("lora_a")) {
                Matrix a = read_mtx(
                    (fs::path(checkpoint) / item.at("lora_a").get<std::string>()).string());
                Matrix b = read_mtx(
                    (fs::path(checkpoint) / item.at("lora_b").get<std::string>()).string());
                report.rows.push_back(norm_row(layer, target + ".down", a));
                report.rows.push_back(norm_row(layer, target + ".up", b));
            } else if (target == "prompt") {
                report.rows.push_back(norm_row(layer, target, factor_of("q_down")));
            } else {
                report.rows.push_back(norm_row(layer, target + ".down", factor_of("q_down")));
                report.rows.push_back(norm_row(layer, target + ".up", factor_of("q_up")));
            }
        }
    } else {
        throw std::invalid_argument("unknown checkpoint kind '" + kind + "'");
    }

    resolve_out(out, "analyze-norms");
    write_norm_report_csv((fs::path(out) / "norms.csv").string(), report);
    for (const auto &r : report.rows) {
        std::printf("L%zu %-14s spectral=%.6f frobenius=%.6f\n", r.layer,
                    r.name.c_str(), r.spectral, r.frobenius);
    }
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_rademacher(std::size_t m, double gamma, std::size_t trials,
                   std::size_t dim, std::uint64_t seed, std::string out) {
    std::mt19937_64 rng(seed * 0xff51afd7ed558ccdull + 2);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vector> xs(m, Vector(dim));
    for (auto &x : xs)
        for (double &v : x) v = gauss(rng);
    RademacherEstimate e = rademacher_estimate(xs, gamma, trials, seed);
    resolve_out(out, "rademacher");
    write_rademacher_json((fs::path(out) / "rademacher.json").string(), e);
    std::printf("m=%zu gamma=%.17g trials=%zu estimate=%.17g std_error=%.17g\n",
                e.m, e.gamma, e.trials, e.estimate, e.std_error);
    return 0;
}

int cmd_pretrain(const TrainConfig &tcfg, std::uint64_t task_seed,
                 std::size_t per_class, double target, std::string out) {
    ModelConfig mcfg;
    mcfg.seed = tcfg.seed;
    std::vector<EpochMetrics> metrics;
    VitModel model = pretrain_synthetic(mcfg, task_seed, per_class, tcfg, target, &metrics);
    resolve_out(out, "pretrain");
    save_model((fs::path(out) / "model").string(), model);
    write_metrics_csv((fs::path(out) / "metrics.csv").string(), metrics);
    write_summary_json((fs::path(out) / "summary.json").string(), tcfg, metrics);
    std::printf("final accuracy %.4f over %zu epochs\n",
                metrics.empty() ? 0.0 : metrics.back().eval_accuracy, metrics.size());
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_finetune(const TrainConfig &tcfg, const std::string &model_dir,
                 std::uint64_t task_seed, std::size_t per_class,
                 std::size_t eval_per_class, std::string out) {
    VitModel model = load_model(model_dir);
    Dataset train = make_blob_dataset(model.cfg, task_seed, per_class);
    Dataset eval = make_blob_dataset(model.cfg, task_seed * 0x5851f42d4c957f2dull + 11,
                                     eval_per_class);
    FinetuneEngine engine(model, tcfg);
    std::vector<EpochMetrics> metrics = engine.train(train, eval);
    resolve_out(out, "finetune");
    save_adapters((fs::path(out) / "adapters").string(), engine);
    save_model((fs::path(out) / "model").string(), engine.materialized_model());
    write_metrics_csv((fs::path(out) / "metrics.csv").string(), metrics);
    write_summary_json((fs::path(out) / "summary.json").string(), tcfg, metrics);
    NormReport report = factors_norm_report(engine);
    if (!report.rows.empty())
        write_norm_report_csv((fs::path(out) / "factor_norms.csv").string(), report);
    std::printf("method=%s trainable=%zu final accuracy %.4f\n",
                method_name(tcfg.method).c_str(), engine.trainable_param_count(),
                metrics.empty() ? 0.0 : metrics.back().eval_accuracy);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_sweep(const TrainConfig &base, const std::string &model_dir,
              std::uint64_t task_seed, std::size_t per_class,
              std::size_t eval_per_class, std::string out) {
    // Abbreviated preset grid over learning rate and weight decay.
    const std::vector<double> lrs{0.2, 0.1, 0.05, 0.01, 0.005, 0.001, 0.0001};
    const std::vector<double> wds{0.05, 0.01, 0.005, 0.001, 0.0};
    VitModel model = load_model(model_dir);
    Dataset train = make_blob_dataset(model.cfg, task_seed, per_class);
    Dataset eval = make_blob_dataset(model.cfg, task_seed * 0x5851f42d4c957f2dull + 11,
                                     eval_per_class);
    resolve_out(out, "sweep");
    std::ofstream f(fs::path(out) / "sweep.csv", std::ios::trunc);
    f << "lr,weight_decay,final_accuracy,final_loss\n";
    for (double lr : lrs) {
        for (double wd : wds) {
            TrainConfig cfg = base;
            cfg.lr = lr;
            cfg.weight_decay = wd;
            FinetuneEngine engine(model, cfg);
            auto metrics = engine.train(train, eval);
            const double acc = metrics.empty() ? 0.0 : metrics.back().eval_accuracy;
            const double loss = metrics.empty() ? 0.0 : metrics.back().train_loss;
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", lr, wd, acc, loss);
            f << buf << "\n";
            std::printf("lr=%g wd=%g accuracy=%.4f\n", lr, wd, acc);
        }
    }
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_report(const std::string &a_path, const std::string &b_path,
               std::string out) {
    NormReport a = read_norm_report_csv(a_path);
    NormReport b = read_norm_report_csv(b_path);
    RunDiff diff = compare_runs(a, b);
    resolve_out(out, "report");
    std::ofstream f(fs::path(out) / "diff.csv", std::ios::trunc);
    f << "layer,name,spectral_delta,frobenius_delta\n";
    for (const auto &r : diff.rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g,%.17g", r.layer,
                      r.name.c_str(), r.spectral_delta, r.frobenius_delta);
        f << buf << "\n";
    }
    std::printf("%s\n", diff.verdict.c_str());
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

void add_train_flags(CLI::App *cmd, TrainConfig &cfg, std::string &method,
                     std::string &config_path) {
    cmd->add_option("--config", config_path, "Config file (key = value lines)");
    cmd->add_option("--lr", cfg.lr, "Peak learning rate");
    cmd->add_option("--weight-decay", cfg.weight_decay, "Decoupled weight decay");
    cmd->add_option("--dropout", cfg.dropout, "Dropout on adapter outputs");
    cmd->add_option("--batch-size", cfg.batch_size, "Minibatch size");
    cmd->add_option("--epochs", cfg.epochs, "Training epochs");
    cmd->add_option("--warmup-epochs", cfg.warmup_epochs, "Linear warmup epochs");
    cmd->add_option("--seed", cfg.seed, "Root RNG seed");
    cmd->add_option("--method", method,
                    "One of linear-probe, full-finetune, lora, lora-aoft, "
                    "adapter-aoft, vpt-aoft-shallow, vpt-aoft-deep");
    cmd->add_option("--bottleneck", cfg.bottleneck, "Bottleneck dimension d");
    cmd->add_flag("--no-residual", [&cfg](std::size_t) { cfg.residual = false; },
                  "Drop the residual connection in the adapter scheme");
    cmd->add_flag("--zero-gate", cfg.zero_gate,
                  "Zero-initialized scalar gate on the delta");
    cmd->add_flag("--star", cfg.aoft_star,
                  "Learnable per-column scaling of the down factor (zero init)");
    cmd->add_flag("--decay-generators", cfg.decay_generators,
                  "Apply weight decay to generator vectors too");
    cmd->add_option("--lora-targets", cfg.lora_targets,
                    "Adapted weight matrices (wq wk wv wo fc1 fc2)");
    cmd->add_flag("--adapter-mha", cfg.adapter_mha,
                  "Adapter on attention output in addition to the FFN");
}

TrainConfig finish_train_config(TrainConfig cli_cfg, const std::string &method,
                                const std::string &config_path) {
    TrainConfig cfg = cli_cfg;
    if (!config_path.empty()) {
        // Config file supplies the base; explicit flags already overwrote the
        // defaults in cli_cfg, so reapply only the non-default values.
        TrainConfig from_file = parse_train_config(config_path);
        TrainConfig defaults;
        cfg = from_file;
        if (cli_cfg.lr != defaults.lr) cfg.lr = cli_cfg.lr;
        if (cli_cfg.weight_decay != defaults.weight_decay) cfg.weight_decay = cli_cfg.weight_decay;
        if (cli_cfg.dropout != defaults.dropout) cfg.dropout = cli_cfg.dropout;
        if (cli_cfg.batch_size != defaults.batch_size) cfg.batch_size = cli_cfg.batch_size;
        if (cli_cfg.epochs != defaults.epochs) cfg.epochs = cli_cfg.epochs;
        if (cli_cfg.warmup_epochs != defaults.warmup_epochs) cfg.warmup_epochs = cli_cfg.warmup_epochs;
        if (cli_cfg.seed != defaults.seed) cfg.seed = cli_cfg.seed;
        if (cli_cfg.bottleneck != defaults.bottleneck) cfg.bottleneck = cli_cfg.bottleneck;
        if (cli_cfg.residual != defaults.residual) cfg.residual = cli_cfg.residual;
        if (cli_cfg.zero_gate != defaults.zero_gate) cfg.zero_gate = cli_cfg.zero_gate;
        if (cli_cfg.aoft_star != defaults.aoft_star) cfg.aoft_star = cli_cfg.aoft_star;
        if (cli_cfg.decay_generators != defaults.decay_generators)
            cfg.decay_generators = cli_cfg.decay_generators;
        if (cli_cfg.adapter_mha != defaults.adapter_mha) cfg.adapter_mha = cli_cfg.adapter_mha;
        if (cli_cfg.lora_targets != defaults.lora_targets) cfg.lora_targets = cli_cfg.lora_targets;
    }
    if (!method.empty()) cfg.method = method_from_name(method);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Approximately orthogonal factor generation, weight-geometry "
                 "diagnostics, and desk-scale fine-tuning experiments"};
    app.require_subcommand(1);

    // gen-ortho
    std::size_t go_n = 64, go_d = 8;
    std::uint64_t go_seed = 0;
    bool go_strict = false;
    std::string go_out;
    auto *gen = app.add_subcommand("gen-ortho", "Generate an orthogonal factor from a random vector");
    gen->add_option("--n", go_n, "Generator vector length N")->check(CLI::PositiveNumber);
    gen->add_option("--d", go_d, "Columns to keep (bottleneck d)")->check(CLI::PositiveNumber);
    gen->add_option("--seed", go_seed, "Root RNG seed");
    gen->add_flag("--strict", go_strict, "Normalize the vector so columns are exactly orthogonal");
    gen->add_option("--out", go_out, "Output directory (default out/gen-ortho/<timestamp>)");

    // grad-check
    std::size_t gc_n = 16, gc_d = 4, gc_trials = 50;
    std::uint64_t gc_seed = 0;
    auto *grad = app.add_subcommand("grad-check", "Finite-difference check of the analytic generator gradient");
    grad->add_option("--n", gc_n, "Generator vector length N")->check(CLI::PositiveNumber);
    grad->add_option("--d", gc_d, "Bottleneck d")->check(CLI::PositiveNumber);
    grad->add_option("--trials", gc_trials, "Random cases")->check(CLI::PositiveNumber);
    grad->add_option("--seed", gc_seed, "Root RNG seed");

    // analyze-angles
    std::string aa_input, aa_out;
    double aa_bin = 1.0;
    auto *angles = app.add_subcommand("analyze-angles", "Pairwise column-angle histogram of an MTX1 matrix");
    angles->add_option("input", aa_input, "MTX1 matrix file")->required()->check(CLI::ExistingFile);
    angles->add_option("--bin-width", aa_bin, "Histogram bin width in degrees")->check(CLI::PositiveNumber);
    angles->add_option("--out", aa_out, "Output directory (default out/analyze-angles/<timestamp>)");

    // analyze-norms
    std::string an_ckpt, an_out;
    auto *norms = app.add_subcommand("analyze-norms", "Spectral/Frobenius norm report for a checkpoint");
    norms->add_option("checkpoint", an_ckpt, "Model or adapter checkpoint directory")
        ->required()->check(CLI::ExistingDirectory);
    norms->add_option("--out", an_out, "Output directory (default out/analyze-norms/<timestamp>)");

    // rademacher
    std::size_t rm_m = 8, rm_trials = 1000, rm_dim = 8;
    double rm_gamma = 1.0;
    std::uint64_t rm_seed = 0;
    std::string rm_out;
    auto *rad = app.add_subcommand("rademacher", "Monte-Carlo complexity estimate over Rademacher signs");
    rad->add_option("--m", rm_m, "Sample count m")->check(CLI::PositiveNumber);
    rad->add_option("--gamma", rm_gamma, "Operator-norm bound gamma")->check(CLI::NonNegativeNumber);
    rad->add_option("--trials", rm_trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
    rad->add_option("--dim", rm_dim, "Sample vector dimension")->check(CLI::PositiveNumber);
    rad->add_option("--seed", rm_seed, "Root RNG seed");
    rad->add_option("--out", rm_out, "Output directory (default out/rademacher/<timestamp>)");

    // pretrain
    TrainConfig pt_cfg;
    pt_cfg.epochs = 30;
    pt_cfg.warmup_epochs = 3;
    pt_cfg.lr = 0.001;
    std::string pt_method, pt_config, pt_out;
    std::uint64_t pt_task_seed = 0;
    std::size_t pt_per_class = 32;
    double pt_target = 0.95;
    auto *pre = app.add_subcommand("pretrain", "Train the toy transformer from scratch on a synthetic task");
    add_train_flags(pre, pt_cfg, pt_method, pt_config);
    pre->add_option("--task-seed", pt_task_seed, "Synthetic task seed");
    pre->add_option("--per-class", pt_per_class, "Training samples per class")->check(CLI::PositiveNumber);
    pre->add_option("--target", pt_target, "Required best accuracy");
    pre->add_option("--out", pt_out, "Output directory (default out/pretrain/<timestamp>)");

    // finetune
    TrainConfig ft_cfg;
    ft_cfg.epochs = 30;
    ft_cfg.warmup_epochs = 3;
    std::string ft_method, ft_config, ft_model, ft_out;
    std::uint64_t ft_task_seed = 1;
    std::size_t ft_per_class = 32, ft_eval_per_class = 32;
    auto *fin = app.add_subcommand("finetune", "Fine-tune a pretrained checkpoint on a shifted task");
    fin->add_option("--model", ft_model, "Pretrained model checkpoint directory")
        ->required()->check(CLI::ExistingDirectory);
    add_train_flags(fin, ft_cfg, ft_method, ft_config);
    fin->add_option("--task-seed", ft_task_seed, "Synthetic task seed");
    fin->add_option("--per-class", ft_per_class, "Training samples per class")->check(CLI::PositiveNumber);
    fin->add_option("--eval-per-class", ft_eval_per_class, "Eval samples per class")->check(CLI::PositiveNumber);
    fin->add_option("--out", ft_out, "Output directory (default out/finetune/<timestamp>)");

    // sweep
    TrainConfig sw_cfg;
    sw_cfg.epochs = 10;
    sw_cfg.warmup_epochs = 2;
    std::string sw_method, sw_config, sw_model, sw_out;
    std::uint64_t sw_task_seed = 1;
    std::size_t sw_per_class = 16, sw_eval_per_class = 16;
    auto *swp = app.add_subcommand("sweep", "Learning-rate / weight-decay grid over a fine-tuning setup");
    swp->add_option("--model", sw_model, "Pretrained model checkpoint directory")
        ->required()->check(CLI::ExistingDirectory);
    add_train_flags(swp, sw_cfg, sw_method, sw_config);
    swp->add_option("--task-seed", sw_task_seed, "Synthetic task seed");
    swp->add_option("--per-class", sw_per_class, "Training samples per class")->check(CLI::PositiveNumber);
    swp->add_option("--eval-per-class", sw_eval_per_class, "Eval samples per class")->check(CLI::PositiveNumber);
    swp->add_option("--out", sw_out, "Output directory (default out/sweep/<timestamp>)");

    // report
    std::string rp_a, rp_b, rp_out;
    auto *rep = app.add_subcommand("report", "Compare two norm-report CSVs row by row");
    rep->add_option("--a", rp_a, "Baseline norm-report CSV")->required()->check(CLI::ExistingFile);
    rep->add_option("--b", rp_b, "Comparison norm-report CSV")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", rp_out, "Output directory (default out/report/<timestamp>)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            if (go_d > go_n) throw std::invalid_argument("--d must be <= --n");
            return cmd_gen_ortho(go_n, go_d, go_seed, go_strict, go_out);
        }
        if (grad->parsed()) {
            if (gc_d > gc_n) throw std::invalid_argument("--d must be <= --n");
            return cmd_grad_check(gc_n, gc_d, gc_trials, gc_seed);
        }
        if (angles->parsed()) return cmd_analyze_angles(aa_input, aa_bin, aa_out);
        if (norms->parsed()) return cmd_analyze_norms(an_ckpt, an_out);
        if (rad->parsed())
            return cmd_rademacher(rm_m, rm_gamma, rm_trials, rm_dim, rm_seed, rm_out);
        if (pre->parsed()) {
            TrainConfig cfg = finish_train_config(pt_cfg, pt_method, pt_config);
            return cmd_pretrain(cfg, pt_task_seed, pt_per_class, pt_target, pt_out);
        }
        if (fin->parsed()) {
            TrainConfig cfg = finish_train_config(ft_cfg, ft_method, ft_config);
            return cmd_finetune(cfg, ft_model, ft_task_seed, ft_per_class,
                                ft_eval_per_class, ft_out);
        }
        if (swp->parsed()) {
            TrainConfig cfg = finish_train_config(sw_cfg, sw_method, sw_config);
            return cmd_sweep(cfg, sw_model, sw_task_seed, sw_per_class,
                             sw_eval_per_class, sw_out);
        }
        if (rep->parsed()) return cmd_report(rp_a, rp_b, rp_out);
    } catch (const std::invalid_argument &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
