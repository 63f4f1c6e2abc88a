#ifndef MTE_DIVERSITY_HPP
#define MTE_DIVERSITY_HPP

#include <cstddef>
#include <vector>

#include "mte/ensemble.hpp"

namespace mte {

// 2x2 correctness contingency table for one classifier pair, with the
// both-wrong cell split by whether the two wrong labels coincide.
struct ContingencyCounts {
    std::size_t a = 0;       // both correct
    std::size_t b = 0;       // first correct, second wrong
    std::size_t c = 0;       // first wrong, second correct
    std::size_t d = 0;       // both wrong
    std::size_t d_same = 0;  // both wrong, same label
    std::size_t d_diff = 0;  // both wrong, different labels

    std::size_t n() const { return a + b + c + d; }
};

ContingencyCounts contingency(const std::vector<int>& pred_i, const std::vector<int>& pred_j,
                              const std::vector<int>& truth);

// Pairwise metric with its degenerate-denominator flag. Degenerate values
// follow the documented conventions (0 for Q and C, the d_diff cap for R) and
// are excluded from report averages.
struct MetricValue {
    double value = 0.0;
    bool degenerate = false;
};

MetricValue q_statistic(const ContingencyCounts& cc);   // (ad-bc)/(ad+bc)
MetricValue ratio_errors(const ContingencyCounts& cc);  // d_diff/d_same
double neg_double_fault(const ContingencyCounts& cc);   // -d/N
double disagreement(const ContingencyCounts& cc);       // (b+c)/N
MetricValue correlation(const ContingencyCounts& cc);   // (ad-bc)/sqrt(marginals)

// The five metrics averaged over all C(members,2) pairs; degenerate pairs are
// excluded per-metric and counted.
struct DiversityReport {
    double q = 0.0;
    double r = 0.0;
    double nd = 0.0;
    double dis = 0.0;
    double corr = 0.0;
    std::size_t pairs = 0;
    std::size_t q_degenerate = 0;
    std::size_t r_degenerate = 0;
    std::size_t c_degenerate = 0;
};

DiversityReport pairwise_report(const PredictionTable& table, const std::vector<int>& truth);

// Two-sample pooled-variance Student's t with two-sided p-value.
struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;
};

TTestResult t_test(const std::vector<double>& sample_a, const std::vector<double>& sample_b);

// I_x(a, b), evaluated by continued fraction; exposed for oracle tests.
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace mte

#endif
