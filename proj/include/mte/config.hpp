#ifndef MTE_CONFIG_HPP
#define MTE_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mte/data.hpp"
#include "mte/model.hpp"
#include "mte/pruning.hpp"
#include "mte/training.hpp"

namespace mte {

struct DataConfig {
    std::string task_id = "small";  // free-form tag used in file names
    TaskKind kind = TaskKind::classification;
    std::uint64_t gen_seed = 1;
    std::uint64_t source_seed = 1;
    double hardness = 0.8;
    std::size_t n = 1200;
};

// One structured config file drives every subcommand. Documented keys:
// model, train, pretrain, imp, data, seeds, scheme, out_dir, jobs.
struct ExperimentConfig {
    ModelSpec model;          // head width/kind filled in per task
    TrainConfig train;
    PretrainConfig pretrain;
    ImpConfig imp;
    DataConfig data;
    std::vector<std::uint64_t> seeds;  // 20 for the two-group protocol
    std::string scheme = "baseline";
    std::string out_dir = "runs/default";
    std::size_t jobs = 0;  // 0 = hardware concurrency

    Dataset make_downstream() const;
    Dataset make_source() const;
    ModelSpec model_for(const Dataset& d) const;
    std::uint64_t hash() const;  // canonical-serialization FNV-1a
};

ExperimentConfig default_config();

// Parses a JSON config file; unknown keys are rejected and errors carry the
// offending key (or the line for syntax errors).
ExperimentConfig load_config(const std::string& path);

std::string dump_config(const ExperimentConfig& cfg);

}  // namespace mte

#endif
