#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "affectfuse/cli.hpp"

namespace cli = affectfuse::cli;

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::optional<int> grid;

    void attach(CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--seed", seed, "random seed (overrides config)");
        sub->add_option("--jobs", jobs, "worker threads (overrides config)")->check(CLI::PositiveNumber);
    }

    /// Config file first, then flags on top.
    affectfuse::PipelineConfig resolve() const {
        affectfuse::PipelineConfig cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        if (seed) cfg.seed = *seed;
        if (jobs) cfg.jobs = *jobs;
        if (grid) cfg.fusion_grid = *grid;
        cfg.validate();
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"affectfuse: audio emotion features, classifiers, decision fusion and evaluation"};
    app.require_subcommand(1);
    CommonFlags common;

    cli::ExtractOptions ex;
    auto* extract = app.add_subcommand("extract", "write per-clip short-term feature dumps");
    extract->add_option("--manifest", ex.manifest, "dataset manifest CSV")->required();
    extract->add_option("--out", ex.out_dir, "output directory")->required();
    extract->add_option("--split", ex.split, "only this split");
    extract->add_flag("--maps", ex.maps, "also write AFM1 map dumps");
    common.attach(extract);

    cli::TrainOptions tr;
    auto* train = app.add_subcommand("train", "train a classifier on the train split");
    train->add_option("--manifest", tr.manifest, "dataset manifest CSV")->required();
    train->add_option("--rep", tr.representation, "holistic-svm | seq-lstm | map-lstm")->required();
    train->add_option("--out", tr.out_model, "model file to write")->required();
    train->add_option("--log", tr.log_csv, "training log CSV (default <out>.log.csv)");
    common.attach(train);

    cli::ScoreOptions sc;
    auto* score = app.add_subcommand("score", "emit a score CSV for one manifest split");
    score->add_option("--model", sc.model, "model file")->required();
    score->add_option("--manifest", sc.manifest, "dataset manifest CSV")->required();
    score->add_option("--split", sc.split, "train | validation | test")->capture_default_str();
    score->add_option("--out", sc.out_csv, "score CSV to write")->required();
    score->add_option("--model-id", sc.model_id, "model id (default: model file stem)");
    common.attach(score);

    cli::FuseOptions fu;
    auto* fuse = app.add_subcommand("fuse", "grid-search fusion weights on a labeled split");
    fuse->add_option("scores", fu.score_files, "score CSVs, optionally as model_id=path")->required();
    fuse->add_option("--manifest", fu.manifest, "manifest holding ground-truth labels")->required();
    fuse->add_option("--split", fu.split, "split whose labels are used")->capture_default_str();
    fuse->add_option("--grid", common.grid, "lattice resolution G")->check(CLI::PositiveNumber);
    fuse->add_option("--out", fu.out_json, "result JSON (default: stdout)");
    fuse->add_option("--log", fu.log_csv, "per-point lattice log CSV");
    fuse->add_option("--preds", fu.preds_csv, "fused predictions CSV at the best weights");
    common.attach(fuse);

    cli::EvalOptions ev;
    auto* eval = app.add_subcommand("eval", "confusion matrix and accuracy summaries");
    eval->add_option("--preds", ev.preds_csv, "predictions CSV (clip_id,label)")->required();
    eval->add_option("--manifest", ev.manifest, "manifest holding ground-truth labels")->required();
    eval->add_option("--split", ev.split, "split whose labels are used")->capture_default_str();
    eval->add_option("--out", ev.out_prefix, "output prefix for metrics JSON and confusion CSVs");

    cli::SynthOptions sy;
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic tone/noise corpus");
    synth->add_option("--out", sy.out_dir, "output directory")->required();
    synth->add_option("--train", sy.train_per_class, "train clips per class")->capture_default_str();
    synth->add_option("--validation", sy.validation_per_class, "validation clips per class")->capture_default_str();
    synth->add_option("--test", sy.test_per_class, "test clips per class")->capture_default_str();
    synth->add_option("--seed", sy.seed, "random seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kExitUsage;
    }

    affectfuse::PipelineConfig cfg;
    if (!synth->parsed() && !eval->parsed()) {
        try {
            cfg = common.resolve();
        } catch (const std::invalid_argument& e) {
            std::cerr << e.what() << '\n';
            return cli::kExitUsage;
        } catch (const std::exception& e) {
            std::cerr << e.what() << '\n';
            return cli::kExitFailure;
        }
    }

    if (extract->parsed()) return cli::cmd_extract(ex, cfg);
    if (train->parsed()) return cli::cmd_train(tr, cfg);
    if (score->parsed()) return cli::cmd_score(sc, cfg);
    if (fuse->parsed()) {
        fu.grid = cfg.fusion_grid;
        return cli::cmd_fuse(fu, cfg);
    }
    if (eval->parsed()) return cli::cmd_eval(ev);
    if (synth->parsed()) return cli::cmd_synth(sy);
    return cli::kExitUsage;
}
