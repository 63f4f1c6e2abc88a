#ifndef MTE_HARNESS_HPP
#define MTE_HARNESS_HPP

#include <map>
#include <string>
#include <vector>

#include "mte/config.hpp"
#include "mte/diversity.hpp"
#include "mte/ensemble.hpp"
#include "mte/io.hpp"

namespace mte {

// Trains one scheme's 20 members from the shared pretrained body. Seeds run
// in pool order; the first half is group 1, the second half group 2. Jobs are
// parallel across seeds except under active-lt, whose coefficient masks chain
// sequentially through the preceding seeds' IMP masks.
std::vector<MemberCheckpoint> train_scheme(const ExperimentConfig& cfg, Scheme scheme,
                                           const ParamVector& body, const Dataset& data,
                                           std::size_t jobs);

struct SchemeReportRow {
    Scheme scheme;
    SchemeEval eval;
    double p_vs_baseline = -1.0;  // -1 = not applicable
    double p_vs_base_lt = -1.0;
};

struct ReportBundle {
    std::vector<SchemeReportRow> accuracy;               // one row per scheme
    std::map<std::string, DiversityReport> diversity;    // keyed by scheme name
    std::map<std::string, Matrix> iou;                   // lt schemes, first 5 seeds
    // gain-vs-member-count sweep: ens/diff per scheme per k = 1..max_k
    std::map<std::string, std::vector<SchemeEval>> by_k;
    double majority_baseline = 0.0;
};

ReportBundle build_report(const ExperimentConfig& cfg,
                          const std::map<std::string, std::vector<MemberCheckpoint>>& schemes,
                          const Dataset& data, std::size_t k);

// Rendering. CSV files land in `dir`; the text table is returned for stdout.
void write_report_files(const ReportBundle& rep, const std::string& dir);
std::string render_accuracy_table(const ReportBundle& rep);
std::string render_diversity_table(const ReportBundle& rep);

// Small worker pool: runs fn(i) for i in [0, n) on up to `jobs` threads.
// Exceptions are captured and rethrown on the caller thread.
void parallel_for(std::size_t jobs, std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mte

#endif
