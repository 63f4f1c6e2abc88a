#include "mte/diversity.hpp"

#include <cmath>

namespace mte {

ContingencyCounts contingency(const std::vector<int>& pred_i, const std::vector<int>& pred_j,
                              const std::vector<int>& truth) {
    require(pred_i.size() == truth.size() && pred_j.size() == truth.size(), ErrKind::contract,
            "contingency: prediction/truth lengths differ");
    require(!truth.empty(), ErrKind::contract, "contingency: empty sample");
    ContingencyCounts cc;
    for (std::size_t s = 0; s < truth.size(); ++s) {
        const bool ri = pred_i[s] == truth[s];
        const bool rj = pred_j[s] == truth[s];
        if (ri && rj) ++cc.a;
        else if (ri) ++cc.b;
        else if (rj) ++cc.c;
        else {
            ++cc.d;
            if (pred_i[s] == pred_j[s]) ++cc.d_same;
            else ++cc.d_diff;
        }
    }
    return cc;
}

MetricValue q_statistic(const ContingencyCounts& cc) {
    const double ad = static_cast<double>(cc.a) * static_cast<double>(cc.d);
    const double bc = static_cast<double>(cc.b) * static_cast<double>(cc.c);
    if (ad + bc == 0.0) return {0.0, true};
    return {(ad - bc) / (ad + bc), false};
}

MetricValue ratio_errors(const ContingencyCounts& cc) {
    if (cc.d_same == 0) return {static_cast<double>(cc.d_diff), true};
    return {static_cast<double>(cc.d_diff) / static_cast<double>(cc.d_same), false};
}

double neg_double_fault(const ContingencyCounts& cc) {
    return -static_cast<double>(cc.d) / static_cast<double>(cc.n());
}

double disagreement(const ContingencyCounts& cc) {
    return static_cast<double>(cc.b + cc.c) / static_cast<double>(cc.n());
}

MetricValue correlation(const ContingencyCounts& cc) {
    const double m1 = static_cast<double>(cc.a + cc.b);
    const double m2 = static_cast<double>(cc.c + cc.d);
    const double m3 = static_cast<double>(cc.a + cc.c);
    const double m4 = static_cast<double>(cc.b + cc.d);
    if (m1 == 0.0 || m2 == 0.0 || m3 == 0.0 || m4 == 0.0) return {0.0, true};
    const double ad = static_cast<double>(cc.a) * static_cast<double>(cc.d);
    const double bc = static_cast<double>(cc.b) * static_cast<double>(cc.c);
    return {(ad - bc) / std::sqrt(m1 * m2 * m3 * m4), false};
}

DiversityReport pairwise_report(const PredictionTable& table, const std::vector<int>& truth) {
    require(table.kind == TaskKind::classification, ErrKind::contract,
            "pairwise_report: diversity metrics are defined for classification only");
    require(table.members >= 2, ErrKind::contract, "pairwise_report: needs >= 2 members");
    require(truth.size() == table.samples, ErrKind::contract, "pairwise_report: truth length differs");

    DiversityReport rep;
    double q_sum = 0.0, r_sum = 0.0, nd_sum = 0.0, d_sum = 0.0, c_sum = 0.0;
    std::vector<int> pi(table.samples), pj(table.samples);
    for (std::size_t i = 0; i < table.members; ++i) {
        for (std::size_t j = i + 1; j < table.members; ++j) {
            for (std::size_t s = 0; s < table.samples; ++s) {
                pi[s] = table.hard_label(i, s);
                pj[s] = table.hard_label(j, s);
            }
            const ContingencyCounts cc = contingency(pi, pj, truth);
            ++rep.pairs;
            const MetricValue q = q_statistic(cc);
            if (q.degenerate) ++rep.q_degenerate;
            else q_sum += q.value;
            const MetricValue r = ratio_errors(cc);
            if (r.degenerate) ++rep.r_degenerate;
            else r_sum += r.value;
            const MetricValue c = correlation(cc);
            if (c.degenerate) ++rep.c_degenerate;
            else c_sum += c.value;
            nd_sum += neg_double_fault(cc);
            d_sum += disagreement(cc);
        }
    }
    const auto avg = [&](double sum, std::size_t excluded) {
        const std::size_t kept = rep.pairs - excluded;
        return kept == 0 ? 0.0 : sum / static_cast<double>(kept);
    };
    rep.q = avg(q_sum, rep.q_degenerate);
    rep.r = avg(r_sum, rep.r_degenerate);
    rep.corr = avg(c_sum, rep.c_degenerate);
    rep.nd = nd_sum / static_cast<double>(rep.pairs);
    rep.dis = d_sum / static_cast<double>(rep.pairs);
    return rep;
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    require(a > 0.0 && b > 0.0, ErrKind::contract, "incomplete beta: a, b must be > 0");
    require(x >= 0.0 && x <= 1.0, ErrKind::contract, "incomplete beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    if (x < (a + 1.0) / (a + b + 2.0))
        return std::exp(ln_front) * betacf(a, b, x) / a;
    return 1.0 - std::exp(ln_front) * betacf(b, a, 1.0 - x) / b;
}

TTestResult t_test(const std::vector<double>& sample_a, const std::vector<double>& sample_b) {
    const std::size_t na = sample_a.size();
    const std::size_t nb = sample_b.size();
    require(na >= 2 && nb >= 2, ErrKind::contract, "t_test: each sample needs >= 2 values");

    double ma = 0.0, mb = 0.0;
    for (double v : sample_a) ma += v;
    for (double v : sample_b) mb += v;
    ma /= static_cast<double>(na);
    mb /= static_cast<double>(nb);

    double ssa = 0.0, ssb = 0.0;
    for (double v : sample_a) ssa += (v - ma) * (v - ma);
    for (double v : sample_b) ssb += (v - mb) * (v - mb);

    TTestResult res;
    res.df = na + nb - 2;
    const double pooled_var = (ssa + ssb) / static_cast<double>(res.df);
    require(pooled_var > 0.0, ErrKind::contract, "t_test: zero pooled variance");

    const double se = std::sqrt(pooled_var * (1.0 / static_cast<double>(na) +
                                              1.0 / static_cast<double>(nb)));
    res.t = (ma - mb) / se;
    const double df = static_cast<double>(res.df);
    res.p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + res.t * res.t));
    return res;
}

}  // namespace mte
