#include "gsam/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace gsam {

using nlohmann::json;

namespace {

std::vector<AdapterBranch> branches_from_names(const std::vector<std::string>& names) {
    std::vector<AdapterBranch> out;
    for (const std::string& n : names) {
        if (n == "conv1x1") out.push_back(AdapterBranch::Conv1x1);
        else if (n == "conv3x3") out.push_back(AdapterBranch::Conv3x3);
        else if (n == "dilated_r1") out.push_back(AdapterBranch::DilatedR1);
        else if (n == "dilated_r2") out.push_back(AdapterBranch::DilatedR2);
        else if (n == "dilated_r3") out.push_back(AdapterBranch::DilatedR3);
        else throw std::invalid_argument("unknown adapter branch: " + n);
    }
    return out;
}

json adapter_to_json(const AdapterConfig& a) {
    json j;
    j["bottleneck_dim"] = a.bottleneck_dim;
    std::vector<std::string> names;
    for (AdapterBranch b : a.branch_set) names.push_back(branch_name(b));
    j["branch_set"] = names;
    j["rates"] = a.rates;
    j["scale"] = a.scale;
    j["activation"] = a.activation;
    return j;
}

AdapterConfig adapter_from_json(const json& j, int embed_dim) {
    AdapterConfig a;
    a.embed_dim = embed_dim;
    a.bottleneck_dim = j.value("bottleneck_dim", a.bottleneck_dim);
    if (j.contains("branch_set")) {
        a.branch_set = branches_from_names(j.at("branch_set").get<std::vector<std::string>>());
    }
    if (j.contains("rates")) {
        const auto r = j.at("rates").get<std::vector<int>>();
        if (r.size() != 3) throw std::invalid_argument("adapter rates: expected 3 values");
        a.rates = {r[0], r[1], r[2]};
    }
    a.scale = j.value("scale", a.scale);
    a.activation = j.value("activation", a.activation);
    return a;
}

json model_to_json_obj(const ModelConfig& m) {
    json j;
    j["encoder"]["patch_size"] = m.encoder.patch_size;
    j["encoder"]["embed_dim"] = m.encoder.embed_dim;
    j["encoder"]["depth"] = m.encoder.depth;
    j["encoder"]["num_heads"] = m.encoder.num_heads;
    j["encoder"]["use_peg"] = m.encoder.use_peg;
    j["encoder"]["adapter"] = adapter_to_json(m.encoder.adapter);
    j["cnn"]["stage_channels"] = m.cnn.stage_channels;
    j["cnn"]["tap_stage"] = m.cnn.tap_stage;
    j["cnn"]["separate_projections"] = m.cnn.separate_projections;
    j["num_classes"] = m.num_classes;
    j["decoder_channels"] = m.decoder_channels;
    j["freeze_patterns"] = m.freeze.frozen_name_patterns;
    return j;
}

ModelConfig model_from_json_obj(const json& j) {
    ModelConfig m;
    if (j.contains("encoder")) {
        const json& e = j.at("encoder");
        m.encoder.patch_size = e.value("patch_size", m.encoder.patch_size);
        m.encoder.embed_dim = e.value("embed_dim", m.encoder.embed_dim);
        m.encoder.depth = e.value("depth", m.encoder.depth);
        m.encoder.num_heads = e.value("num_heads", m.encoder.num_heads);
        m.encoder.use_peg = e.value("use_peg", m.encoder.use_peg);
        if (e.contains("adapter")) {
            m.encoder.adapter = adapter_from_json(e.at("adapter"), m.encoder.embed_dim);
        }
    }
    m.encoder.adapter.embed_dim = m.encoder.embed_dim;
    if (j.contains("cnn")) {
        const json& c = j.at("cnn");
        m.cnn.stage_channels = c.value("stage_channels", m.cnn.stage_channels);
        m.cnn.tap_stage = c.value("tap_stage", m.cnn.tap_stage);
        m.cnn.separate_projections = c.value("separate_projections", m.cnn.separate_projections);
    }
    m.cnn.proj_dim = m.encoder.embed_dim;
    m.num_classes = j.value("num_classes", m.num_classes);
    m.decoder_channels = j.value("decoder_channels", m.decoder_channels);
    if (j.contains("freeze_patterns")) {
        m.freeze.frozen_name_patterns = j.at("freeze_patterns").get<std::vector<std::string>>();
    }
    return m;
}

json train_to_json_obj(const TrainConfig& t) {
    json j;
    j["epochs"] = t.epochs;
    j["batch_size"] = t.batch_size;
    j["lr0"] = t.lr0;
    j["seed"] = t.seed;
    j["loss"] = t.loss;
    j["augment"]["crop"] = {t.augment.crop_h, t.augment.crop_w};
    j["augment"]["pad_before_crop"] = t.augment.pad_before_crop;
    j["augment"]["hflip"] = t.augment.hflip;
    j["augment"]["rot90"] = t.augment.rot90;
    return j;
}

TrainConfig train_from_json_obj(const json& j) {
    TrainConfig t;
    t.epochs = j.value("epochs", t.epochs);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.lr0 = j.value("lr0", t.lr0);
    t.seed = j.value("seed", t.seed);
    t.loss = j.value("loss", t.loss);
    if (j.contains("augment")) {
        const json& a = j.at("augment");
        if (a.contains("crop")) {
            const auto c = a.at("crop").get<std::vector<int>>();
            if (c.size() != 2) throw std::invalid_argument("augment crop: expected [h, w]");
            t.augment.crop_h = c[0];
            t.augment.crop_w = c[1];
        }
        t.augment.pad_before_crop = a.value("pad_before_crop", t.augment.pad_before_crop);
        t.augment.hflip = a.value("hflip", t.augment.hflip);
        t.augment.rot90 = a.value("rot90", t.augment.rot90);
    }
    t.augment.seed = t.seed;
    return t;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
    return model_to_json_obj(cfg).dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
    return model_from_json_obj(json::parse(text));
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["model"] = model_to_json_obj(cfg.model);
    j["train"] = train_to_json_obj(cfg.train);
    j["data_dir"] = cfg.data_dir;
    j["out_dir"] = cfg.out_dir;
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    RunConfig cfg;
    if (j.contains("model")) cfg.model = model_from_json_obj(j.at("model"));
    if (j.contains("train")) cfg.train = train_from_json_obj(j.at("train"));
    cfg.data_dir = j.value("data_dir", cfg.data_dir);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream os(path);
    os << run_config_to_json(cfg) << "\n";
    if (!os) throw std::runtime_error("cannot write config file: " + path);
}

}  // namespace gsam
