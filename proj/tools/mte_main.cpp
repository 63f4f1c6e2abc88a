// Experiment harness: pretrain a shared body on the synthetic source task,
// finetune per-scheme ensemble members (dense, bagged, or pruned tickets),
// and emit the accuracy/diversity/mask-overlap report tables.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "mte/harness.hpp"
#include "mte/pruning.hpp"

namespace fs = std::filesystem;
using namespace mte;

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kBodyName = "body.ckpt";

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrKind::config: return 2;
        case ErrKind::numeric: return 3;
        case ErrKind::missing_artifact: return 4;
        default: return 1;
    }
}

struct CliOptions {
    std::string config_path;
    std::string scheme;
    std::string seeds;
    std::string out_dir;
    std::string schemes = "all";
    std::size_t jobs = SIZE_MAX;
    std::size_t k = 5;
    double tau = -1.0;
    std::string taus = "0.001,0.003,0.01,0.03,0.1";
    std::size_t sweep_seeds = 6;
};

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
}

ExperimentConfig resolve_config(const CliOptions& opt) {
    ExperimentConfig cfg = opt.config_path.empty() ? default_config() : load_config(opt.config_path);
    if (!opt.scheme.empty()) cfg.scheme = opt.scheme;
    if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
    if (opt.jobs != SIZE_MAX) cfg.jobs = opt.jobs;
    if (opt.tau >= 0.0) cfg.train.tau = opt.tau;
    if (!opt.seeds.empty()) {
        cfg.seeds.clear();
        for (const auto& s : split_commas(opt.seeds)) cfg.seeds.push_back(std::stoull(s));
    }
    return cfg;
}

std::string run_dir(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    return cfg.out_dir;
}

RunManifest load_or_new_manifest(const std::string& dir) {
    const std::string path = dir + "/" + kManifestName;
    if (fs::exists(path)) return load_manifest(path);
    return {};
}

// Forcibly single-job across seeds under active-lt; its coefficient masks
// chain through the preceding seeds.
std::size_t scheme_jobs(const ExperimentConfig& cfg, Scheme s) {
    return s == Scheme::active_lt ? 1 : cfg.jobs;
}

int cmd_pretrain(const CliOptions& opt) {
    ExperimentConfig cfg = resolve_config(opt);
    const std::string dir = run_dir(cfg);

    Dataset source = cfg.make_source();
    ModelSpec spec = cfg.model_for(source);
    ParamVector body = init_pretrained(spec, source, cfg.data.source_seed, cfg.pretrain);

    CheckpointMeta meta;
    meta.seed = cfg.data.source_seed;
    meta.stage = Stage::body;
    meta.config_hash = cfg.hash();
    save_checkpoint(dir + "/" + kBodyName, body, nullptr, meta);

    RunManifest manifest = load_or_new_manifest(dir);
    manifest.config_hash = cfg.hash();
    manifest.body_path = kBodyName;
    manifest.body_fnv64 = fnv1a_file(dir + "/" + kBodyName);
    save_manifest(dir + "/" + kManifestName, manifest);

    std::ofstream snap(dir + "/config.json");
    snap << dump_config(cfg) << "\n";

    std::cout << "pretrained body -> " << dir << "/" << kBodyName << " (fnv64 "
              << hash_hex(manifest.body_fnv64) << ")\n";
    return 0;
}

int cmd_train(const CliOptions& opt) {
    ExperimentConfig cfg = resolve_config(opt);
    const std::string dir = run_dir(cfg);
    const Scheme scheme = scheme_from_name(cfg.scheme);

    const std::string body_path = dir + "/" + kBodyName;
    require(fs::exists(body_path), ErrKind::missing_artifact,
            "no pretrained body at " + body_path + "; run `mte pretrain` first");
    LoadedCheckpoint body = load_checkpoint(body_path);

    Dataset data = cfg.make_downstream();
    std::vector<MemberCheckpoint> members =
        train_scheme(cfg, scheme, body.params, data, scheme_jobs(cfg, scheme));

    const std::string member_dir = dir + "/members/" + std::string(scheme_name(scheme));
    const std::string mask_dir = dir + "/masks/" + std::string(scheme_name(scheme));
    fs::create_directories(member_dir);
    RunManifest manifest = load_or_new_manifest(dir);
    std::vector<ManifestMember> entries;
    for (const auto& m : members) {
        const std::string rel =
            "members/" + std::string(scheme_name(scheme)) + "/seed" + std::to_string(m.seed) + ".ckpt";
        save_member(dir + "/" + rel, m, cfg.hash());
        ManifestMember mm;
        mm.seed = m.seed;
        mm.group = m.group;
        mm.path = rel;
        mm.fnv64 = fnv1a_file(dir + "/" + rel);
        if (m.mask) {
            fs::create_directories(mask_dir);
            const std::string mrel = "masks/" + std::string(scheme_name(scheme)) + "/seed" +
                                     std::to_string(m.seed) + ".mask";
            save_mask(dir + "/" + mrel, *m.mask);
            mm.mask_path = mrel;
            mm.mask_fnv64 = fnv1a_file(dir + "/" + mrel);
        }
        entries.push_back(mm);
    }
    manifest.schemes[std::string(scheme_name(scheme))] = entries;
    save_manifest(dir + "/" + kManifestName, manifest);

    std::cout << "trained " << members.size() << " " << scheme_name(scheme) << " members -> "
              << member_dir << "\n";
    return 0;
}

int cmd_report(const CliOptions& opt) {
    ExperimentConfig cfg = resolve_config(opt);
    const std::string dir = run_dir(cfg);
    RunManifest manifest = load_manifest(dir + "/" + kManifestName);

    std::vector<std::string> wanted;
    if (opt.schemes == "all") {
        for (Scheme s : kAllSchemes) wanted.emplace_back(scheme_name(s));
    } else {
        wanted = split_commas(opt.schemes);
    }
    verify_manifest(manifest, dir, wanted);

    std::map<std::string, std::vector<MemberCheckpoint>> schemes;
    for (const auto& name : wanted) {
        std::vector<MemberCheckpoint> members;
        for (const auto& mm : manifest.schemes.at(name))
            members.push_back(load_member(dir + "/" + mm.path));
        schemes[name] = std::move(members);
    }

    Dataset data = cfg.make_downstream();
    ReportBundle rep = build_report(cfg, schemes, data, opt.k);
    const std::string report_dir = dir + "/reports";
    write_report_files(rep, report_dir);

    std::cout << "accuracy (k = " << opt.k << ", majority-class baseline "
              << rep.majority_baseline << ")\n"
              << render_accuracy_table(rep) << "\n";
    if (!rep.diversity.empty()) std::cout << "diversity\n" << render_diversity_table(rep) << "\n";
    std::cout << "report files -> " << report_dir << "\n";
    return 0;
}

int cmd_sweep_tau(const CliOptions& opt) {
    ExperimentConfig cfg = resolve_config(opt);
    const std::string dir = run_dir(cfg);

    const std::string body_path = dir + "/" + kBodyName;
    require(fs::exists(body_path), ErrKind::missing_artifact,
            "no pretrained body at " + body_path + "; run `mte pretrain` first");
    LoadedCheckpoint body = load_checkpoint(body_path);

    Dataset data = cfg.make_downstream();
    const ModelSpec spec = cfg.model_for(data);

    ExperimentConfig sweep_cfg = cfg;
    sweep_cfg.seeds.assign(cfg.seeds.begin(),
                           cfg.seeds.begin() + std::min(opt.sweep_seeds, cfg.seeds.size()));
    require(sweep_cfg.seeds.size() >= 2, ErrKind::config, "sweep-tau: needs >= 2 seeds");

    Matrix xdev(data.dev_idx.size(), data.x.cols);
    std::vector<int> truth(data.dev_idx.size());
    for (std::size_t i = 0; i < data.dev_idx.size(); ++i) {
        const double* src = data.x.row(data.dev_idx[i]);
        for (std::size_t c = 0; c < data.x.cols; ++c) xdev.at(i, c) = src[c];
        truth[i] = data.labels[data.dev_idx[i]];
    }

    std::ofstream csv(dir + "/sweep_tau.csv");
    csv << "tau,single,ens_all,diff,mean_mask_iou\n";
    std::cout << "tau       single    ens(all)  diff      mask IoU\n";
    for (const auto& tau_s : split_commas(opt.taus)) {
        ExperimentConfig c = sweep_cfg;
        c.train.tau = std::stod(tau_s);
        std::vector<MemberCheckpoint> members =
            train_scheme(c, Scheme::random_lt, body.params, data, c.jobs);

        PredictionTable table = build_prediction_table(spec, members, xdev);
        double single = 0.0;
        std::size_t ens_correct = 0;
        std::vector<double> avg(table.width);
        for (std::size_t i = 0; i < table.samples; ++i) {
            for (std::size_t j = 0; j < table.width; ++j) avg[j] = 0.0;
            for (std::size_t m = 0; m < table.members; ++m) {
                const double* row = table.row(m, i);
                for (std::size_t j = 0; j < table.width; ++j) avg[j] += row[j];
            }
            std::size_t best = 0;
            for (std::size_t j = 1; j < table.width; ++j)
                if (avg[j] > avg[best]) best = j;
            if (static_cast<int>(best) == truth[i]) ++ens_correct;
        }
        for (std::size_t m = 0; m < table.members; ++m) {
            std::size_t correct = 0;
            for (std::size_t i = 0; i < table.samples; ++i)
                if (table.hard_label(m, i) == truth[i]) ++correct;
            single += static_cast<double>(correct) / static_cast<double>(table.samples);
        }
        single /= static_cast<double>(table.members);
        const double ens = static_cast<double>(ens_correct) / static_cast<double>(table.samples);

        std::vector<PruneMask> masks;
        for (const auto& m : members) masks.push_back(*m.mask);
        const Matrix iou = overlap_matrix(masks);
        double mean_iou = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < iou.rows; ++i)
            for (std::size_t j = i + 1; j < iou.cols; ++j) {
                mean_iou += iou.at(i, j);
                ++cnt;
            }
        mean_iou /= static_cast<double>(cnt);

        char line[160];
        std::snprintf(line, sizeof line, "%-9s %-9.4f %-9.4f %+-9.4f %-9.4f\n", tau_s.c_str(),
                      single, ens, ens - single, mean_iou);
        std::cout << line;
        csv << tau_s << "," << single << "," << ens << "," << ens - single << "," << mean_iou
            << "\n";
    }
    std::cout << "sweep table -> " << dir << "/sweep_tau.csv\n";
    return 0;
}

int cmd_gen_data(const CliOptions& opt) {
    ExperimentConfig cfg = resolve_config(opt);
    const std::string dir = run_dir(cfg);

    Dataset source = cfg.make_source();
    write_csv(source, source.train_idx, dir + "/source_train.csv");
    write_csv(source, source.dev_idx, dir + "/source_dev.csv");

    Dataset down = cfg.make_downstream();
    write_csv(down, down.train_idx, dir + "/" + cfg.data.task_id + "_train.csv");
    write_csv(down, down.dev_idx, dir + "/" + cfg.data.task_id + "_dev.csv");

    std::cout << "wrote source (" << source.size() << ") and " << cfg.data.task_id << " ("
              << down.size() << ") CSVs -> " << dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-ticket ensemble lab"};
    app.require_subcommand(1);

    CliOptions opt;
    app.add_option("--config", opt.config_path, "JSON config file (keys: model, train, pretrain, imp, data, seeds, scheme, out_dir, jobs)");
    app.add_option("--out-dir", opt.out_dir, "override out_dir");
    app.add_option("--jobs", opt.jobs, "worker threads across seeds (0 = hardware)");
    app.add_option("--seeds", opt.seeds, "override seeds, comma-separated");
    app.add_option("--tau", opt.tau, "override train.tau");

    auto* pretrain = app.add_subcommand("pretrain", "train the shared body on the source task");
    auto* train = app.add_subcommand("train", "train one scheme's ensemble members");
    train->add_option("--scheme", opt.scheme, "baseline|bagging|base-lt|active-lt|random-lt");
    auto* report = app.add_subcommand("report", "evaluate trained schemes and write report tables");
    report->add_option("--k", opt.k, "ensemble size for the main tables (default 5)");
    report->add_option("--schemes", opt.schemes, "comma list or 'all'");
    auto* sweep = app.add_subcommand("sweep-tau", "grid-sweep the masked-L1 coefficient");
    sweep->add_option("--taus", opt.taus, "comma list of tau values");
    sweep->add_option("--sweep-seeds", opt.sweep_seeds, "seeds per tau (default 6)");
    auto* gen = app.add_subcommand("gen-data", "export the synthetic tasks as CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pretrain->parsed()) return cmd_pretrain(opt);
        if (train->parsed()) return cmd_train(opt);
        if (report->parsed()) return cmd_report(opt);
        if (sweep->parsed()) return cmd_sweep_tau(opt);
        if (gen->parsed()) return cmd_gen_data(opt);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
