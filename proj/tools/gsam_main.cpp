// gsam: dataset generation, training, evaluation, ablations, cost reports and
// gradient checks for the variable-input-size segmentation model.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <nlohmann/json.hpp>

#include "gsam/config.hpp"
#include "gsam/gradcheck_suite.hpp"
#include "gsam/macs.hpp"
#include "gsam/model.hpp"
#include "gsam/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gsam;

namespace {

std::pair<int, int> parse_size(const std::string& text) {
    const size_t x = text.find('x');
    if (x == std::string::npos) throw CLI::ValidationError("size must look like HxW, got " + text);
    return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
}

std::vector<std::pair<int, int>> parse_sizes(const std::string& text) {
    std::vector<std::pair<int, int>> out;
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t comma = text.find(',', pos);
        const std::string tok = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (!tok.empty()) {
            if (tok.find('x') != std::string::npos) {
                out.push_back(parse_size(tok));
            } else {
                const int s = std::stoi(tok);
                out.push_back({s, s});
            }
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw CLI::ValidationError("no sizes given");
    return out;
}

json iou_to_json(const ConfusionMatrix::Iou& iou) {
    json per = json::array();
    for (size_t c = 0; c < iou.per_class.size(); ++c) {
        per.push_back(iou.present[c] ? json(iou.per_class[c]) : json(nullptr));
    }
    json j;
    j["per_class_iou"] = per;
    j["miou"] = iou.mean;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    os << text;
    if (!os) throw std::runtime_error("cannot write " + path);
}

struct TrainCliArgs {
    std::string config_path, data_dir, out_dir;
    std::string crop, adapter_variant;
    int epochs = -1;
    int batch_size = -1;
    double lr0 = -1.0;
    int64_t seed = -1;
    double val_fraction = -1.0;
    bool pad_before_crop = false;
};

RunConfig resolve_run_config(const TrainCliArgs& a) {
    RunConfig cfg;
    if (!a.config_path.empty()) cfg = load_run_config(a.config_path);
    if (!a.data_dir.empty()) cfg.data_dir = a.data_dir;
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    if (a.epochs > 0) cfg.train.epochs = a.epochs;
    if (a.batch_size > 0) cfg.train.batch_size = a.batch_size;
    if (a.lr0 > 0) cfg.train.lr0 = a.lr0;
    if (a.seed >= 0) cfg.train.seed = static_cast<uint64_t>(a.seed);
    if (!a.crop.empty()) {
        const auto [h, w] = parse_size(a.crop);
        cfg.train.augment.crop_h = h;
        cfg.train.augment.crop_w = w;
    }
    if (a.pad_before_crop) cfg.train.augment.pad_before_crop = true;
    if (!a.adapter_variant.empty()) {
        const auto variants = ablation_variants(AdapterConfig{});
        AdapterConfig chosen = find_variant(variants, a.adapter_variant).config;
        chosen.embed_dim = cfg.model.encoder.embed_dim;
        chosen.bottleneck_dim = cfg.model.encoder.adapter.bottleneck_dim;
        chosen.rates = cfg.model.encoder.adapter.rates;
        cfg.model.encoder.adapter = chosen;
    }
    cfg.train.augment.seed = cfg.train.seed;
    return cfg;
}

struct TrainResult {
    double final_miou = 0.0;
    long long learnable = 0, total = 0;
};

TrainResult run_training(const RunConfig& cfg, double val_fraction, bool echo_config,
                         const std::string& tag = "") {
    if (cfg.data_dir.empty()) throw std::invalid_argument("train: --data is required");
    if (cfg.out_dir.empty()) throw std::invalid_argument("train: --out is required");
    fs::create_directories(cfg.out_dir);

    auto [samples, meta] = import_dataset(cfg.data_dir);
    RunConfig resolved = cfg;
    resolved.model.num_classes = meta.num_classes;

    if (echo_config) {
        json echo = json::parse(run_config_to_json(resolved));
        echo["val_fraction"] = val_fraction;
        write_text((fs::path(cfg.out_dir) / "config.resolved.json").string(), echo.dump(2) + "\n");
    }

    std::vector<Sample> train_set, val_set;
    split_dataset(samples, val_fraction, resolved.train.seed, train_set, val_set);

    GsamModel model(resolved.model, resolved.train.seed);
    const ParameterSummary summary = model.parameter_summary();
    std::cout << (tag.empty() ? "" : "[" + tag + "] ") << "parameters: total " << summary.total
              << ", learnable " << summary.learnable << ", frozen " << summary.frozen << "\n";

    Trainer trainer(model, resolved.train);
    const TrainLog log = trainer.train(train_set, val_set, [&](int epoch, const TrainLog& l) {
        std::cout << (tag.empty() ? "" : "[" + tag + "] ") << "epoch " << epoch << ": lr "
                  << l.lr.back() << ", loss " << l.loss.back() << ", val mIoU "
                  << l.val_miou.back() << "\n";
    });

    write_train_log_csv((fs::path(cfg.out_dir) / "train_log.csv").string(), log);
    write_train_log_summary((fs::path(cfg.out_dir) / "train_log.json").string(), log);
    trainer.save((fs::path(cfg.out_dir) / "checkpoint.ckpt").string(), resolved.train.epochs);

    TrainResult result;
    result.learnable = summary.learnable;
    result.total = summary.total;
    if (!val_set.empty()) {
        const auto iou = evaluate(model, val_set);
        result.final_miou = iou.mean;
        json j = iou_to_json(iou);
        j["split"] = "val";
        j["n_samples"] = val_set.size();
        write_text((fs::path(cfg.out_dir) / "eval.json").string(), j.dump(2) + "\n");
        std::cout << (tag.empty() ? "" : "[" + tag + "] ") << "full-size val mIoU: " << iou.mean
                  << "\n";
    }
    return result;
}

int cmd_gen(const std::string& out_dir, int n, const std::string& size, int classes,
            uint64_t seed) {
    const auto [h, w] = parse_size(size);
    const auto samples = generate_shapes(n, h, w, classes, seed);
    DatasetMeta meta;
    meta.n = n;
    meta.height = h;
    meta.width = w;
    meta.num_classes = classes;
    meta.seed = seed;
    export_dataset(out_dir, samples, meta);
    std::cout << "wrote " << n << " samples (" << h << "x" << w << ", " << classes
              << " classes) to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& split,
             double val_fraction, int64_t seed_override, const std::string& out_file) {
    const LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    GsamModel model(model_config_from_json(ckpt.config_json), 0);
    restore_parameters(model, ckpt);

    auto [samples, meta] = import_dataset(data_dir);
    std::vector<Sample> chosen;
    if (split == "all") {
        chosen = std::move(samples);
    } else {
        std::vector<Sample> train_set, val_set;
        const uint64_t seed = seed_override >= 0 ? static_cast<uint64_t>(seed_override) : 0;
        split_dataset(samples, val_fraction, seed, train_set, val_set);
        chosen = split == "val" ? std::move(val_set) : std::move(train_set);
    }
    if (chosen.empty()) throw std::runtime_error("eval: selected split is empty");

    const auto iou = evaluate(model, chosen);
    json j = iou_to_json(iou);
    j["split"] = split;
    j["n_samples"] = chosen.size();
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!out_file.empty()) write_text(out_file, text);
    return 0;
}

int cmd_macs(const std::string& config_path, const std::string& size, const std::string& out_base) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    const auto [h, w] = parse_size(size);
    const CostReport report = count_macs(cfg.model, h, w);
    std::cout << cost_report_to_json(report);
    if (!out_base.empty()) {
        write_text(out_base + ".csv", cost_report_to_csv(report));
        write_text(out_base + ".json", cost_report_to_json(report));
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& sizes_text,
              const std::string& out_file) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    const auto rows = size_sweep(cfg.model, parse_sizes(sizes_text));
    const std::string csv = sweep_to_csv(rows);
    std::cout << csv;
    if (!out_file.empty()) write_text(out_file, csv);
    return 0;
}

int cmd_gradcheck(double tolerance, uint64_t seed) {
    const auto entries = run_gradcheck_suite(seed);
    bool ok = true;
    for (const auto& e : entries) {
        const bool pass = e.report.ok(tolerance);
        ok = ok && pass;
        std::cout << (pass ? "  ok  " : " FAIL ") << std::left << std::setw(28) << e.name
                  << " max_rel_error " << std::scientific << std::setprecision(3)
                  << e.report.max_rel_error << std::defaultfloat << "\n";
    }
    std::cout << "suite max_rel_error " << std::scientific << std::setprecision(3)
              << suite_max_error(entries) << std::defaultfloat << " (tolerance " << tolerance
              << ")\n";
    return ok ? 0 : 1;
}

int cmd_ablate(const TrainCliArgs& base_args, double val_fraction) {
    const RunConfig base = resolve_run_config(base_args);
    if (base.out_dir.empty()) throw std::invalid_argument("ablate: --out is required");
    fs::create_directories(base.out_dir);

    AdapterConfig full = base.model.encoder.adapter;
    if (full.branch_set.size() != 5) {
        throw std::invalid_argument("ablate: base config must have the full five-branch adapter");
    }

    struct Row {
        std::string name;
        long long learnable = 0;
        double miou = 0.0;
    };
    std::vector<Row> rows;
    for (const AblationVariant& v : ablation_variants(full)) {
        RunConfig cfg = base;
        cfg.model.encoder.adapter = v.config;
        cfg.out_dir = (fs::path(base.out_dir) / v.key).string();
        std::cout << "=== " << v.display_name << " ===\n";
        const TrainResult r = run_training(cfg, val_fraction, /*echo_config=*/true, v.key);
        rows.push_back({v.display_name, r.learnable, r.final_miou});
    }

    std::ostringstream csv;
    csv << "variant,learnable_params,val_miou\n";
    std::cout << "\n" << std::left << std::setw(36) << "variant" << std::right << std::setw(12)
              << "learnable" << std::setw(12) << "val mIoU" << "\n";
    for (const Row& r : rows) {
        csv << r.name << "," << r.learnable << "," << r.miou << "\n";
        std::cout << std::left << std::setw(36) << r.name << std::right << std::setw(12)
                  << r.learnable << std::setw(12) << std::fixed << std::setprecision(4) << r.miou
                  << std::defaultfloat << "\n";
    }
    write_text((fs::path(base.out_dir) / "ablation.csv").string(), csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GSAM-style variable-input-size segmentation: training, ablation and cost tools"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic shape dataset");
    std::string gen_out, gen_size = "128x128";
    int gen_n = 0, gen_classes = 4;
    uint64_t gen_seed = 0;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--n", gen_n, "number of samples")->required()
        ->check(CLI::PositiveNumber.description("n must be positive"));
    gen->add_option("--size", gen_size, "sample size HxW (default 128x128)");
    gen->add_option("--classes", gen_classes, "number of classes incl. background (default 4)");
    gen->add_option("--seed", gen_seed, "generator seed (default 0)");

    // train
    auto* train = app.add_subcommand("train", "train on a dataset directory");
    TrainCliArgs ta;
    double val_fraction = 0.2;
    train->add_option("--config", ta.config_path, "run config JSON");
    train->add_option("--data", ta.data_dir, "dataset directory");
    train->add_option("--out", ta.out_dir, "output directory");
    train->add_option("--crop", ta.crop, "random crop HxW");
    train->add_option("--adapter-variant", ta.adapter_variant,
                      "adapter configuration (see `ablate`): adaptformer, no_conv, no_dilated, "
                      "no_conv1x1, no_conv3x3, no_dilated_r12, no_dilated_r24, no_dilated_r36, full");
    train->add_option("--epochs", ta.epochs, "override epochs");
    train->add_option("--batch-size", ta.batch_size, "override batch size");
    train->add_option("--lr0", ta.lr0, "override initial learning rate");
    train->add_option("--seed", ta.seed, "override seed");
    train->add_flag("--pad-before-crop", ta.pad_before_crop, "reflect-pad before cropping");
    train->add_option("--val-fraction", val_fraction, "held-out fraction (default 0.2)");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint at full image size");
    std::string eval_ckpt, eval_data, eval_split = "all", eval_out;
    double eval_val_fraction = 0.2;
    int64_t eval_seed = -1;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--split", eval_split, "all | val | train (default all)")
        ->check(CLI::IsMember({"all", "val", "train"}));
    eval->add_option("--val-fraction", eval_val_fraction, "fraction for val/train splits");
    eval->add_option("--seed", eval_seed, "split seed (default: 0)");
    eval->add_option("--out", eval_out, "also write the JSON report here");

    // macs
    auto* macs = app.add_subcommand("macs", "per-layer MACs/params report at one input size");
    std::string macs_config, macs_size = "128x128", macs_out;
    macs->add_option("--config", macs_config, "run config JSON");
    macs->add_option("--size", macs_size, "input size HxW (default 128x128)");
    macs->add_option("--out", macs_out, "output base path (writes .csv and .json)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "total MACs across input sizes");
    std::string sweep_config, sweep_sizes = "32,64,128,256", sweep_out;
    sweep->add_option("--config", sweep_config, "run config JSON");
    sweep->add_option("--sizes", sweep_sizes, "comma list: 32,64,128,256 or 128x96,...");
    sweep->add_option("--out", sweep_out, "CSV output file");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    double gc_tol = 1e-4;
    uint64_t gc_seed = 7;
    gradcheck->add_option("--tolerance", gc_tol, "max relative error (default 1e-4)");
    gradcheck->add_option("--seed", gc_seed, "suite seed");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train all nine adapter variants");
    TrainCliArgs aa;
    double ablate_val_fraction = 0.2;
    ablate->add_option("--config", aa.config_path, "run config JSON");
    ablate->add_option("--data", aa.data_dir, "dataset directory");
    ablate->add_option("--out", aa.out_dir, "output directory (one subdir per variant)");
    ablate->add_option("--crop", aa.crop, "random crop HxW");
    ablate->add_option("--epochs", aa.epochs, "epochs per variant (default from config)");
    ablate->add_option("--batch-size", aa.batch_size, "override batch size");
    ablate->add_option("--lr0", aa.lr0, "override initial learning rate");
    ablate->add_option("--seed", aa.seed, "override seed");
    ablate->add_option("--val-fraction", ablate_val_fraction, "held-out fraction (default 0.2)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            return app.exit(e);
        }
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_out, gen_n, gen_size, gen_classes, gen_seed);
        if (train->parsed()) {
            run_training(resolve_run_config(ta), val_fraction, /*echo_config=*/true);
            return 0;
        }
        if (eval->parsed()) {
            return cmd_eval(eval_ckpt, eval_data, eval_split, eval_val_fraction, eval_seed, eval_out);
        }
        if (macs->parsed()) return cmd_macs(macs_config, macs_size, macs_out);
        if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_sizes, sweep_out);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_tol, gc_seed);
        if (ablate->parsed()) return cmd_ablate(aa, ablate_val_fraction);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
