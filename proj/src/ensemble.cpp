#include "mte/ensemble.hpp"

#include <cmath>

namespace mte {

std::string_view scheme_name(Scheme s) {
    switch (s) {
        case Scheme::baseline: return "baseline";
        case Scheme::bagging: return "bagging";
        case Scheme::base_lt: return "base-lt";
        case Scheme::active_lt: return "active-lt";
        case Scheme::random_lt: return "random-lt";
    }
    return "?";
}

Scheme scheme_from_name(std::string_view name) {
    for (Scheme s : kAllSchemes)
        if (scheme_name(s) == name) return s;
    fail(ErrKind::config, "unknown scheme: " + std::string(name));
}

Matrix predict(const ModelSpec& spec, const ParamVector& params, const Matrix& inputs) {
    ForwardPass fp = forward(full_net(spec), params, inputs, nullptr);
    Matrix out = fp.outputs();
    if (spec.head.kind == TaskKind::classification) {
        for (std::size_t i = 0; i < out.rows; ++i) {
            double* row = out.row(i);
            double m = row[0];
            for (std::size_t j = 1; j < out.cols; ++j) m = std::max(m, row[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < out.cols; ++j) {
                row[j] = std::exp(row[j] - m);
                sum += row[j];
            }
            for (std::size_t j = 0; j < out.cols; ++j) row[j] /= sum;
        }
    }
    return out;
}

Matrix ensemble_predict(const ModelSpec& spec, const std::vector<const MemberCheckpoint*>& members,
                        const Matrix& inputs) {
    require(!members.empty(), ErrKind::contract, "ensemble_predict: needs at least one member");
    for (const auto* m : members)
        require(m->params.same_layout(members.front()->params), ErrKind::contract,
                "ensemble_predict: members have heterogeneous parameter layouts");

    Matrix sum = predict(spec, members.front()->params, inputs);
    for (std::size_t i = 1; i < members.size(); ++i) {
        Matrix out = predict(spec, members[i]->params, inputs);
        for (std::size_t j = 0; j < sum.data.size(); ++j) sum.data[j] += out.data[j];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& v : sum.data) v *= inv;
    return sum;
}

namespace {

int argmax_row(const double* row, std::size_t width) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < width; ++j)
        if (row[j] > row[best]) best = j;  // ties keep the lowest index
    return static_cast<int>(best);
}

}  // namespace

PredictionTable build_prediction_table(const ModelSpec& spec,
                                       const std::vector<MemberCheckpoint>& members,
                                       const Matrix& inputs) {
    require(!members.empty(), ErrKind::contract, "prediction table: no members");
    PredictionTable t;
    t.members = members.size();
    t.samples = inputs.rows;
    t.width = spec.head.output_width;
    t.kind = spec.head.kind;
    t.raw.resize(t.members * t.samples * t.width);
    if (t.kind == TaskKind::classification) t.hard.resize(t.members * t.samples);

    for (std::size_t m = 0; m < members.size(); ++m) {
        require(members[m].params.same_layout(members.front().params), ErrKind::contract,
                "prediction table: heterogeneous parameter layouts");
        Matrix out = predict(spec, members[m].params, inputs);
        for (std::size_t i = 0; i < t.samples; ++i) {
            const double* row = out.row(i);
            double* dst = t.raw.data() + (m * t.samples + i) * t.width;
            for (std::size_t j = 0; j < t.width; ++j) dst[j] = row[j];
            if (t.kind == TaskKind::classification)
                t.hard[m * t.samples + i] = argmax_row(row, t.width);
        }
    }
    return t;
}

std::vector<std::vector<std::size_t>> enumerate_combos(std::size_t n, std::size_t k) {
    require(k <= n, ErrKind::contract, "enumerate_combos: k exceeds pool size");
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur(k);
    for (std::size_t i = 0; i < k; ++i) cur[i] = i;
    if (k == 0) {
        out.push_back({});
        return out;
    }
    while (true) {
        out.push_back(cur);
        // advance to the next lexicographic combination
        std::size_t i = k;
        while (i > 0 && cur[i - 1] == n - k + i - 1) --i;
        if (i == 0) break;
        ++cur[i - 1];
        for (std::size_t j = i; j < k; ++j) cur[j] = cur[j - 1] + 1;
    }
    return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size() && !a.empty(), ErrKind::contract, "pearson: length mismatch");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

namespace {

// Correct-count for an averaged output row block; integer bookkeeping keeps
// the identical-members fixture exactly diff = 0.
std::size_t combo_correct(const PredictionTable& t, const std::vector<std::size_t>& members,
                          const std::vector<std::size_t>& pool_rows, const std::vector<int>& truth) {
    std::size_t correct = 0;
    std::vector<double> avg(t.width);
    for (std::size_t i = 0; i < t.samples; ++i) {
        for (std::size_t j = 0; j < t.width; ++j) avg[j] = 0.0;
        for (std::size_t m : members) {
            const double* row = t.row(pool_rows[m], i);
            for (std::size_t j = 0; j < t.width; ++j) avg[j] += row[j];
        }
        std::size_t best = 0;
        for (std::size_t j = 1; j < t.width; ++j)
            if (avg[j] > avg[best]) best = j;
        if (static_cast<int>(best) == truth[i]) ++correct;
    }
    return correct;
}

std::vector<double> combo_mean_outputs(const PredictionTable& t,
                                       const std::vector<std::size_t>& members,
                                       const std::vector<std::size_t>& pool_rows) {
    std::vector<double> avg(t.samples, 0.0);
    for (std::size_t m : members)
        for (std::size_t i = 0; i < t.samples; ++i) avg[i] += t.row(pool_rows[m], i)[0];
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& v : avg) v *= inv;
    return avg;
}

}  // namespace

SchemeEval evaluate_scheme(const ModelSpec& spec, const std::vector<MemberCheckpoint>& pool,
                           std::size_t k, const Dataset& eval_data) {
    require(pool.size() == 20, ErrKind::contract, "evaluate_scheme: pool must hold 20 members");
    std::vector<std::size_t> g1, g2;
    for (std::size_t i = 0; i < pool.size(); ++i)
        (pool[i].group == 1 ? g1 : g2).push_back(i);
    require(g1.size() == 10 && g2.size() == 10, ErrKind::contract,
            "evaluate_scheme: each group must hold 10 members");
    require(k >= 1 && k <= 10, ErrKind::contract, "evaluate_scheme: k must be in [1,10]");
    require(eval_data.kind == spec.head.kind, ErrKind::contract,
            "evaluate_scheme: task kind differs from head");

    Matrix xdev(eval_data.dev_idx.size(), eval_data.x.cols);
    std::vector<int> truth_labels(eval_data.dev_idx.size());
    std::vector<double> truth_targets(eval_data.dev_idx.size());
    for (std::size_t i = 0; i < eval_data.dev_idx.size(); ++i) {
        const double* src = eval_data.x.row(eval_data.dev_idx[i]);
        for (std::size_t c = 0; c < eval_data.x.cols; ++c) xdev.at(i, c) = src[c];
        if (eval_data.kind == TaskKind::classification)
            truth_labels[i] = eval_data.labels[eval_data.dev_idx[i]];
        else
            truth_targets[i] = eval_data.targets[eval_data.dev_idx[i]];
    }

    PredictionTable table = build_prediction_table(spec, pool, xdev);
    const double samples = static_cast<double>(table.samples);

    SchemeEval ev;
    std::vector<std::size_t> all_rows(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) all_rows[i] = i;

    if (eval_data.kind == TaskKind::classification) {
        std::size_t total_correct = 0;
        for (std::size_t m = 0; m < pool.size(); ++m) {
            const std::size_t c = combo_correct(table, {m}, all_rows, truth_labels);
            ev.member_metric.push_back(static_cast<double>(c) / samples);
            total_correct += c;
        }
        ev.single = static_cast<double>(total_correct) /
                    (static_cast<double>(pool.size()) * samples);

        double group_ens[2];
        const std::vector<std::size_t>* groups[2] = {&g1, &g2};
        for (int g = 0; g < 2; ++g) {
            const auto combos = enumerate_combos(groups[g]->size(), k);
            std::size_t sum_correct = 0;
            for (const auto& combo : combos) {
                const std::size_t c = combo_correct(table, combo, *groups[g], truth_labels);
                sum_correct += c;
                ev.combo_metric.push_back(static_cast<double>(c) / samples);
            }
            group_ens[g] = static_cast<double>(sum_correct) /
                           (static_cast<double>(combos.size()) * samples);
        }
        ev.ens = (group_ens[0] + group_ens[1]) / 2.0;
    } else {
        double sum_single = 0.0;
        for (std::size_t m = 0; m < pool.size(); ++m) {
            const double r = pearson(combo_mean_outputs(table, {m}, all_rows), truth_targets);
            ev.member_metric.push_back(r);
            sum_single += r;
        }
        ev.single = sum_single / static_cast<double>(pool.size());

        double group_ens[2];
        const std::vector<std::size_t>* groups[2] = {&g1, &g2};
        for (int g = 0; g < 2; ++g) {
            const auto combos = enumerate_combos(groups[g]->size(), k);
            double sum = 0.0;
            for (const auto& combo : combos) {
                const double r =
                    pearson(combo_mean_outputs(table, combo, *groups[g]), truth_targets);
                sum += r;
                ev.combo_metric.push_back(r);
            }
            group_ens[g] = sum / static_cast<double>(combos.size());
        }
        ev.ens = (group_ens[0] + group_ens[1]) / 2.0;
    }
    ev.diff = ev.ens - ev.single;
    return ev;
}

}  // namespace mte
