#include "mte/config.hpp"

#include <fstream>

#include <json.hpp>

#include "mte/rng.hpp"

using nlohmann::json;

namespace mte {

namespace {

Act act_from_name(const std::string& s) {
    if (s == "relu") return Act::relu;
    if (s == "tanh") return Act::tanh;
    if (s == "none") return Act::none;
    fail(ErrKind::config, "config: unknown activation '" + s + "' (relu|tanh|none)");
}

std::string act_name(Act a) {
    switch (a) {
        case Act::relu: return "relu";
        case Act::tanh: return "tanh";
        case Act::none: return "none";
    }
    return "?";
}

TaskKind kind_from_name(const std::string& s) {
    if (s == "classification") return TaskKind::classification;
    if (s == "regression") return TaskKind::regression;
    fail(ErrKind::config, "config: unknown task kind '" + s + "'");
}

int line_of_offset(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        require(ok, ErrKind::config, "config: unknown key '" + where + key + "'");
    }
}

}  // namespace

Dataset ExperimentConfig::make_downstream() const {
    return gen_downstream_task(data.gen_seed, data.kind, data.hardness, data.n);
}

Dataset ExperimentConfig::make_source() const { return gen_source_task(data.source_seed); }

ModelSpec ExperimentConfig::model_for(const Dataset& d) const {
    ModelSpec spec = model;
    spec.head.kind = d.kind;
    spec.head.output_width = d.kind == TaskKind::classification ? d.classes : 1;
    return spec;
}

std::uint64_t ExperimentConfig::hash() const {
    const std::string canon = dump_config(*this);
    return detail::fnv1a(canon);
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.train.tau = 0.01;
    cfg.seeds.resize(20);
    for (std::size_t i = 0; i < 20; ++i) cfg.seeds[i] = 101 + i;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrKind::config, "config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrKind::config, "config: parse error at line " +
                                  std::to_string(line_of_offset(text, e.byte)) + " of " + path +
                                  ": " + e.what());
    }

    ExperimentConfig cfg = default_config();
    try {
        reject_unknown(j, {"model", "train", "pretrain", "imp", "data", "seeds", "scheme",
                           "out_dir", "jobs"},
                       "");
        if (j.contains("model")) {
            const json& m = j["model"];
            reject_unknown(m, {"input_width", "body", "dropout_p", "head_init_std"}, "model.");
            if (m.contains("input_width")) cfg.model.input_width = m["input_width"].get<std::size_t>();
            if (m.contains("body")) {
                cfg.model.body.clear();
                for (const auto& layer : m["body"]) {
                    reject_unknown(layer, {"width", "act"}, "model.body[].");
                    BodyLayer bl;
                    bl.width = layer.at("width").get<std::size_t>();
                    bl.act = layer.contains("act") ? act_from_name(layer["act"].get<std::string>())
                                                   : Act::relu;
                    cfg.model.body.push_back(bl);
                }
            }
            if (m.contains("dropout_p")) cfg.model.dropout_p = m["dropout_p"].get<double>();
            if (m.contains("head_init_std"))
                cfg.model.head_init_std = m["head_init_std"].get<double>();
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            reject_unknown(t, {"epochs", "lr0", "batch_size", "tau"}, "train.");
            if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<std::size_t>();
            if (t.contains("lr0")) cfg.train.lr0 = t["lr0"].get<double>();
            if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<std::size_t>();
            if (t.contains("tau")) cfg.train.tau = t["tau"].get<double>();
        }
        if (j.contains("pretrain")) {
            const json& p = j["pretrain"];
            reject_unknown(p, {"epochs", "lr0", "batch_size", "dropout_p"}, "pretrain.");
            if (p.contains("epochs")) cfg.pretrain.epochs = p["epochs"].get<std::size_t>();
            if (p.contains("lr0")) cfg.pretrain.lr0 = p["lr0"].get<double>();
            if (p.contains("batch_size")) cfg.pretrain.batch_size = p["batch_size"].get<std::size_t>();
            if (p.contains("dropout_p")) cfg.pretrain.dropout_p = p["dropout_p"].get<double>();
        }
        if (j.contains("imp")) {
            const json& p = j["imp"];
            reject_unknown(p, {"per_round_fraction", "target_ratio", "budget", "ranking"}, "imp.");
            if (p.contains("per_round_fraction"))
                cfg.imp.per_round_fraction = p["per_round_fraction"].get<double>();
            if (p.contains("target_ratio")) cfg.imp.target_ratio = p["target_ratio"].get<double>();
            if (p.contains("budget")) {
                const std::string b = p["budget"].get<std::string>();
                if (b == "original") cfg.imp.budget = ImpConfig::Budget::original;
                else if (b == "remaining") cfg.imp.budget = ImpConfig::Budget::remaining;
                else fail(ErrKind::config, "config: imp.budget must be original|remaining");
            }
            if (p.contains("ranking")) {
                const std::string r = p["ranking"].get<std::string>();
                if (r == "global") cfg.imp.ranking = ImpConfig::Ranking::global;
                else if (r == "per-layer") cfg.imp.ranking = ImpConfig::Ranking::per_layer;
                else fail(ErrKind::config, "config: imp.ranking must be global|per-layer");
            }
        }
        if (j.contains("data")) {
            const json& d = j["data"];
            reject_unknown(d, {"task_id", "kind", "gen_seed", "source_seed", "hardness", "n"},
                           "data.");
            require(d.contains("gen_seed"), ErrKind::config,
                    "config: data block requires key 'gen_seed'");
            cfg.data.gen_seed = d["gen_seed"].get<std::uint64_t>();
            if (d.contains("task_id")) cfg.data.task_id = d["task_id"].get<std::string>();
            if (d.contains("kind")) cfg.data.kind = kind_from_name(d["kind"].get<std::string>());
            if (d.contains("source_seed")) cfg.data.source_seed = d["source_seed"].get<std::uint64_t>();
            if (d.contains("hardness")) cfg.data.hardness = d["hardness"].get<double>();
            if (d.contains("n")) cfg.data.n = d["n"].get<std::size_t>();
        }
        if (j.contains("seeds")) {
            cfg.seeds.clear();
            if (j["seeds"].is_array()) {
                for (const auto& s : j["seeds"]) cfg.seeds.push_back(s.get<std::uint64_t>());
            } else {
                reject_unknown(j["seeds"], {"base", "count"}, "seeds.");
                const std::uint64_t base = j["seeds"].at("base").get<std::uint64_t>();
                const std::size_t count = j["seeds"].at("count").get<std::size_t>();
                for (std::size_t i = 0; i < count; ++i) cfg.seeds.push_back(base + i);
            }
        }
        if (j.contains("scheme")) cfg.scheme = j["scheme"].get<std::string>();
        if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("jobs")) cfg.jobs = j["jobs"].get<std::size_t>();
    } catch (const json::exception& e) {
        fail(ErrKind::config, "config: bad value in " + path + ": " + e.what());
    }

    // Validate with config-level strictness (the finetune entry point itself
    // tolerates lr0 = 0 as a degenerate no-op run).
    cfg.model.validate();
    cfg.train.validate();
    require(cfg.train.lr0 > 0.0, ErrKind::config, "config: train.lr0 must be > 0");
    cfg.imp.validate();
    require(!cfg.seeds.empty(), ErrKind::config, "config: seeds must not be empty");
    require(cfg.data.hardness > 0.0 && cfg.data.hardness <= 1.0, ErrKind::config,
            "config: data.hardness must be in (0,1]");
    return cfg;
}

std::string dump_config(const ExperimentConfig& cfg) {
    json j;
    json body = json::array();
    for (const auto& l : cfg.model.body) body.push_back({{"width", l.width}, {"act", act_name(l.act)}});
    j["model"] = {{"input_width", cfg.model.input_width},
                  {"body", body},
                  {"dropout_p", cfg.model.dropout_p},
                  {"head_init_std", cfg.model.head_init_std}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"lr0", cfg.train.lr0},
                  {"batch_size", cfg.train.batch_size},
                  {"tau", cfg.train.tau}};
    j["pretrain"] = {{"epochs", cfg.pretrain.epochs},
                     {"lr0", cfg.pretrain.lr0},
                     {"batch_size", cfg.pretrain.batch_size},
                     {"dropout_p", cfg.pretrain.dropout_p}};
    j["imp"] = {{"per_round_fraction", cfg.imp.per_round_fraction},
                {"target_ratio", cfg.imp.target_ratio},
                {"budget", cfg.imp.budget == ImpConfig::Budget::original ? "original" : "remaining"},
                {"ranking", cfg.imp.ranking == ImpConfig::Ranking::global ? "global" : "per-layer"}};
    j["data"] = {{"task_id", cfg.data.task_id},
                 {"kind", cfg.data.kind == TaskKind::classification ? "classification" : "regression"},
                 {"gen_seed", cfg.data.gen_seed},
                 {"source_seed", cfg.data.source_seed},
                 {"hardness", cfg.data.hardness},
                 {"n", cfg.data.n}};
    j["seeds"] = cfg.seeds;
    j["scheme"] = cfg.scheme;
    j["out_dir"] = cfg.out_dir;
    j["jobs"] = cfg.jobs;
    return j.dump(2);
}

}  // namespace mte
