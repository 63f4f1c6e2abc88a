#include "mte/harness.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "mte/pruning.hpp"
#include "mte/training.hpp"

namespace mte {

void parallel_for(std::size_t jobs, std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (jobs == 0) jobs = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    jobs = std::min(jobs, n);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

TrainConfig member_train_config(const ExperimentConfig& cfg, std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.dropout_p = cfg.model.dropout_p;
    tc.seed = seed;
    return tc;
}

MemberCheckpoint finish_member(const ExperimentConfig& cfg, const ModelSpec& spec,
                               const ParamVector& theta0, PruneMask mask, const Dataset& data,
                               Scheme scheme, std::uint64_t seed, int group) {
    // The final member finetune trains the ticket from theta0 with no
    // regularizer; the coefficient masks act only during the IMP rehearsals.
    TrainConfig tc = member_train_config(cfg, seed);
    ParamVector start = apply_mask(theta0, mask);
    MemberCheckpoint m;
    m.params = finetune(spec, start, &mask, nullptr, data, tc);
    m.mask = std::move(mask);
    m.seed = seed;
    m.scheme = scheme;
    m.group = group;
    return m;
}

}  // namespace

std::vector<MemberCheckpoint> train_scheme(const ExperimentConfig& cfg, Scheme scheme,
                                           const ParamVector& body, const Dataset& data,
                                           std::size_t jobs) {
    const std::size_t n_seeds = cfg.seeds.size();
    require(n_seeds >= 2 && n_seeds % 2 == 0, ErrKind::contract,
            "train_scheme: seed count must be even (two groups)");
    Dataset local = data;  // shared read-only across workers
    const ModelSpec spec = cfg.model_for(local);
    std::vector<MemberCheckpoint> members(n_seeds);
    auto group_of = [&](std::size_t i) { return i < n_seeds / 2 ? 1 : 2; };

    switch (scheme) {
        case Scheme::baseline: {
            parallel_for(jobs, n_seeds, [&](std::size_t i) {
                const std::uint64_t seed = cfg.seeds[i];
                TrainConfig tc = member_train_config(cfg, seed);
                MemberCheckpoint m;
                m.params = finetune(spec, attach_head(body, spec, seed), nullptr, nullptr, local, tc);
                m.seed = seed;
                m.scheme = scheme;
                m.group = group_of(i);
                members[i] = std::move(m);
            });
            break;
        }
        case Scheme::bagging: {
            parallel_for(jobs, n_seeds, [&](std::size_t i) {
                const std::uint64_t seed = cfg.seeds[i];
                TrainConfig tc = member_train_config(cfg, seed);
                Dataset bag = bag_subset(local, seed);
                MemberCheckpoint m;
                m.params = finetune(spec, attach_head(body, spec, seed), nullptr, nullptr, bag, tc);
                m.seed = seed;
                m.scheme = scheme;
                m.group = group_of(i);
                members[i] = std::move(m);
            });
            break;
        }
        case Scheme::base_lt: {
            parallel_for(jobs, n_seeds, [&](std::size_t i) {
                const std::uint64_t seed = cfg.seeds[i];
                TrainConfig tc = member_train_config(cfg, seed);
                ParamVector theta0 = attach_head(body, spec, seed);
                PruneMask mask = run_imp(spec, theta0, local, tc, cfg.imp, nullptr);
                members[i] = finish_member(cfg, spec, theta0, std::move(mask), local, scheme, seed,
                                           group_of(i));
            });
            break;
        }
        case Scheme::random_lt: {
            const std::size_t n_prunable = prunable_count(spec);
            parallel_for(jobs, n_seeds, [&](std::size_t i) {
                const std::uint64_t seed = cfg.seeds[i];
                TrainConfig tc = member_train_config(cfg, seed);
                ParamVector theta0 = attach_head(body, spec, seed);
                CoeffMask coeff = random_coeff(seed, n_prunable, cfg.imp.target_ratio);
                PruneMask mask = run_imp(spec, theta0, local, tc, cfg.imp, &coeff);
                members[i] = finish_member(cfg, spec, theta0, std::move(mask), local, scheme, seed,
                                           group_of(i));
            });
            break;
        }
        case Scheme::active_lt: {
            // Strict sequential chain: seed i's coefficient mask is the mean
            // of all preceding seeds' IMP masks, so no seed-level parallelism.
            std::vector<PruneMask> previous;
            for (std::size_t i = 0; i < n_seeds; ++i) {
                const std::uint64_t seed = cfg.seeds[i];
                TrainConfig tc = member_train_config(cfg, seed);
                ParamVector theta0 = attach_head(body, spec, seed);
                PruneMask mask;
                if (previous.empty()) {
                    mask = run_imp(spec, theta0, local, tc, cfg.imp, nullptr);
                } else {
                    CoeffMask coeff = active_coeff(previous);
                    mask = run_imp(spec, theta0, local, tc, cfg.imp, &coeff);
                }
                previous.push_back(mask);
                members[i] = finish_member(cfg, spec, theta0, std::move(mask), local, scheme, seed,
                                           group_of(i));
            }
            break;
        }
    }
    return members;
}

ReportBundle build_report(const ExperimentConfig& cfg,
                          const std::map<std::string, std::vector<MemberCheckpoint>>& schemes,
                          const Dataset& data, std::size_t k) {
    ReportBundle rep;
    const ModelSpec spec = cfg.model_for(data);

    const SchemeEval* baseline_eval = nullptr;
    const SchemeEval* base_lt_eval = nullptr;
    for (Scheme s : kAllSchemes) {
        const auto it = schemes.find(std::string(scheme_name(s)));
        if (it == schemes.end()) continue;
        SchemeReportRow row;
        row.scheme = s;
        row.eval = evaluate_scheme(spec, it->second, k, data);
        rep.accuracy.push_back(std::move(row));
        if (s == Scheme::baseline) baseline_eval = &rep.accuracy.back().eval;
        if (s == Scheme::base_lt) base_lt_eval = &rep.accuracy.back().eval;
    }
    for (auto& row : rep.accuracy) {
        if (baseline_eval && row.scheme != Scheme::baseline)
            row.p_vs_baseline = t_test(row.eval.combo_metric, baseline_eval->combo_metric).p;
        if (base_lt_eval && row.scheme != Scheme::base_lt && row.scheme != Scheme::baseline)
            row.p_vs_base_lt = t_test(row.eval.combo_metric, base_lt_eval->combo_metric).p;
    }

    // Member-count sweep for the gain-vs-members CSV.
    for (const auto& [name, members] : schemes) {
        std::vector<SchemeEval> evals;
        for (std::size_t kk = 1; kk <= k; ++kk)
            evals.push_back(evaluate_scheme(spec, members, kk, data));
        rep.by_k[name] = std::move(evals);
    }

    if (data.kind == TaskKind::classification) {
        Matrix xdev(data.dev_idx.size(), data.x.cols);
        std::vector<int> truth(data.dev_idx.size());
        for (std::size_t i = 0; i < data.dev_idx.size(); ++i) {
            const double* src = data.x.row(data.dev_idx[i]);
            for (std::size_t c = 0; c < data.x.cols; ++c) xdev.at(i, c) = src[c];
            truth[i] = data.labels[data.dev_idx[i]];
        }
        for (const auto& [name, members] : schemes) {
            if (name == "bagging") continue;  // diversity table mirrors the 4-scheme layout
            PredictionTable table = build_prediction_table(spec, members, xdev);
            rep.diversity[name] = pairwise_report(table, truth);
        }
        rep.majority_baseline = majority_class_accuracy(data);
    }

    for (const auto& [name, members] : schemes) {
        std::vector<PruneMask> masks;
        for (const auto& m : members) {
            if (!m.mask) break;
            masks.push_back(*m.mask);
            if (masks.size() == 5) break;
        }
        if (masks.size() >= 2) rep.iou[name] = overlap_matrix(masks);
    }
    return rep;
}

namespace {

std::string fmt(double v, const char* spec = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

std::string render_accuracy_table(const ReportBundle& rep) {
    std::string out;
    out += "scheme      single    ens.      diff.     p(base)   p(b-lt)\n";
    for (const auto& row : rep.accuracy) {
        char line[160];
        std::snprintf(line, sizeof line, "%-11s %-9.4f %-9.4f %+-9.4f %-9s %-9s\n",
                      std::string(scheme_name(row.scheme)).c_str(), row.eval.single, row.eval.ens,
                      row.eval.diff,
                      row.p_vs_baseline < 0 ? "-" : fmt(row.p_vs_baseline).c_str(),
                      row.p_vs_base_lt < 0 ? "-" : fmt(row.p_vs_base_lt).c_str());
        out += line;
    }
    return out;
}

std::string render_diversity_table(const ReportBundle& rep) {
    std::string out;
    out += "scheme      Q         R         ND        D         C\n";
    for (Scheme s : kAllSchemes) {
        const auto it = rep.diversity.find(std::string(scheme_name(s)));
        if (it == rep.diversity.end()) continue;
        const DiversityReport& d = it->second;
        char line[160];
        std::snprintf(line, sizeof line, "%-11s %-9.4f %-9.4f %+-9.4f %-9.4f %-9.4f\n",
                      it->first.c_str(), d.q, d.r, d.nd, d.dis, d.corr);
        out += line;
    }
    return out;
}

void write_report_files(const ReportBundle& rep, const std::string& dir) {
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir + "/accuracy.csv");
        out << "scheme,single,ens,diff,p_vs_baseline,p_vs_base_lt\n";
        for (const auto& row : rep.accuracy) {
            out << scheme_name(row.scheme) << "," << fmt(row.eval.single, "%.6f") << ","
                << fmt(row.eval.ens, "%.6f") << "," << fmt(row.eval.diff, "%.6f") << ",";
            if (row.p_vs_baseline >= 0) out << fmt(row.p_vs_baseline, "%.6g");
            out << ",";
            if (row.p_vs_base_lt >= 0) out << fmt(row.p_vs_base_lt, "%.6g");
            out << "\n";
        }
    }
    {
        std::ofstream out(dir + "/accuracy.txt");
        out << render_accuracy_table(rep);
    }
    if (!rep.diversity.empty()) {
        std::ofstream out(dir + "/diversity.csv");
        out << "scheme,q,r,nd,d,c,pairs,q_degenerate,r_degenerate,c_degenerate\n";
        for (Scheme s : kAllSchemes) {
            const auto it = rep.diversity.find(std::string(scheme_name(s)));
            if (it == rep.diversity.end()) continue;
            const DiversityReport& d = it->second;
            out << it->first << "," << fmt(d.q, "%.6f") << "," << fmt(d.r, "%.6f") << ","
                << fmt(d.nd, "%.6f") << "," << fmt(d.dis, "%.6f") << "," << fmt(d.corr, "%.6f")
                << "," << d.pairs << "," << d.q_degenerate << "," << d.r_degenerate << ","
                << d.c_degenerate << "\n";
        }
        std::ofstream txt(dir + "/diversity.txt");
        txt << render_diversity_table(rep);
    }
    for (const auto& [name, matrix] : rep.iou) {
        std::ofstream out(dir + "/iou_" + name + ".csv");
        for (std::size_t i = 0; i < matrix.rows; ++i) {
            for (std::size_t j = 0; j < matrix.cols; ++j)
                out << fmt(matrix.at(i, j), "%.6f") << (j + 1 < matrix.cols ? "," : "\n");
        }
    }
    {
        std::ofstream out(dir + "/gain_vs_members.csv");
        out << "scheme,k,single,ens,diff\n";
        for (const auto& [name, evals] : rep.by_k) {
            for (std::size_t i = 0; i < evals.size(); ++i)
                out << name << "," << i + 1 << "," << fmt(evals[i].single, "%.6f") << ","
                    << fmt(evals[i].ens, "%.6f") << "," << fmt(evals[i].diff, "%.6f") << "\n";
        }
    }
}

}  // namespace mte
