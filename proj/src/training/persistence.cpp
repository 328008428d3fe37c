#include <cstring>
#include <fstream>
#include <set>

#include "styleshift/error.hpp"
#include "styleshift/training.hpp"

namespace styleshift::training {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'S', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void reject_unknown(const json& doc, const std::set<std::string>& known, const std::string& where) {
  if (!doc.is_object()) throw Error("config.type", where + " must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw Error("config.unknown_key", "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_field(const json& doc, const char* key, T& target) {
  if (!doc.contains(key)) return;
  try {
    target = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error("config.type", std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

void TrainingConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error("config.training", msg); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (lr_drop_epoch < 1) fail("lr_drop_epoch must be >= 1");
  if (!(base_lr > 0.0) || !(dropped_lr > 0.0) || !(finetune_lr > 0.0)) {
    fail("learning rates must be positive");
  }
  if (!(head_lr_multiplier > 0.0)) fail("head_lr_multiplier must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (finetune_epochs < 0) fail("finetune_epochs must be >= 0");
  if (!(adversary_weight >= 0.0)) fail("adversary_weight must be >= 0");
  if (adversary_warmup_epochs < 0) fail("adversary_warmup_epochs must be >= 0");
  if (discriminator_hidden < 1) fail("discriminator_hidden must be >= 1");
  if (!(augment.scale_min > 0.0) || augment.scale_min > augment.scale_max) {
    fail("augmentation scale range must satisfy 0 < scale_min <= scale_max");
  }
  if (!(augment.color_jitter >= 0.0 && augment.color_jitter < 1.0)) {
    fail("color_jitter must be in [0, 1)");
  }
  backbone.validate();
}

double TrainingConfig::lr_for_epoch(int epoch) const {
  return epoch < lr_drop_epoch ? base_lr : dropped_lr;
}

json to_json(const TrainingConfig& c) {
  return json{
      {"epochs", c.epochs},
      {"base_lr", c.base_lr},
      {"lr_drop_epoch", c.lr_drop_epoch},
      {"dropped_lr", c.dropped_lr},
      {"momentum", c.momentum},
      {"head_lr_multiplier", c.head_lr_multiplier},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"augment",
       {{"horizontal_flip", c.augment.horizontal_flip},
        {"scale_min", c.augment.scale_min},
        {"scale_max", c.augment.scale_max},
        {"color_jitter", c.augment.color_jitter},
        {"normalize", c.augment.normalize}}},
      {"lr_normalization", c.lr_normalization},
      {"finetune_epochs", c.finetune_epochs},
      {"finetune_lr", c.finetune_lr},
      {"adversary_weight", c.adversary_weight},
      {"adversary_warmup_epochs", c.adversary_warmup_epochs},
      {"discriminator_hidden", c.discriminator_hidden},
      {"backbone",
       {{"architecture", c.backbone.architecture},
        {"pretrained", c.backbone.pretrained},
        {"widths", c.backbone.widths},
        {"blocks_per_stage", c.backbone.blocks_per_stage}}},
  };
}

TrainingConfig training_config_from_json(const json& doc) {
  reject_unknown(doc,
                 {"epochs", "base_lr", "lr_drop_epoch", "dropped_lr", "momentum",
                  "head_lr_multiplier", "batch_size", "seed", "augment", "lr_normalization",
                  "finetune_epochs", "finetune_lr", "adversary_weight", "adversary_warmup_epochs",
                  "discriminator_hidden", "backbone"},
                 "training");
  TrainingConfig c;
  read_field(doc, "epochs", c.epochs);
  read_field(doc, "base_lr", c.base_lr);
  read_field(doc, "lr_drop_epoch", c.lr_drop_epoch);
  read_field(doc, "dropped_lr", c.dropped_lr);
  read_field(doc, "momentum", c.momentum);
  read_field(doc, "head_lr_multiplier", c.head_lr_multiplier);
  read_field(doc, "batch_size", c.batch_size);
  read_field(doc, "seed", c.seed);
  read_field(doc, "lr_normalization", c.lr_normalization);
  read_field(doc, "finetune_epochs", c.finetune_epochs);
  read_field(doc, "finetune_lr", c.finetune_lr);
  read_field(doc, "adversary_weight", c.adversary_weight);
  read_field(doc, "adversary_warmup_epochs", c.adversary_warmup_epochs);
  read_field(doc, "discriminator_hidden", c.discriminator_hidden);
  if (doc.contains("augment")) {
    const json& a = doc.at("augment");
    reject_unknown(a, {"horizontal_flip", "scale_min", "scale_max", "color_jitter", "normalize"},
                   "training.augment");
    read_field(a, "horizontal_flip", c.augment.horizontal_flip);
    read_field(a, "scale_min", c.augment.scale_min);
    read_field(a, "scale_max", c.augment.scale_max);
    read_field(a, "color_jitter", c.augment.color_jitter);
    read_field(a, "normalize", c.augment.normalize);
  }
  if (doc.contains("backbone")) {
    const json& b = doc.at("backbone");
    reject_unknown(b, {"architecture", "pretrained", "widths", "blocks_per_stage"},
                   "training.backbone");
    if (b.contains("architecture")) {
      const std::string arch = b.at("architecture").get<std::string>();
      // Explicit widths describe a custom architecture; otherwise use the preset.
      if (b.contains("widths")) {
        c.backbone.architecture = arch;
      } else {
        c.backbone = BackboneSpec::preset(arch);
      }
    }
    read_field(b, "pretrained", c.backbone.pretrained);
    read_field(b, "widths", c.backbone.widths);
    read_field(b, "blocks_per_stage", c.backbone.blocks_per_stage);
  }
  c.validate();
  return c;
}

json to_json(const EpochRecord& r) {
  json doc{{"epoch", r.epoch},       {"stage", r.stage}, {"backbone_lr", r.backbone_lr},
           {"head_lr", r.head_lr},   {"loss", r.loss},   {"domain_loss", r.domain_loss}};
  if (r.stage == "adversarial") {
    doc["adversary_weight"] = r.adversary_weight;
    doc["discriminator_loss"] = r.discriminator_loss;
    doc["discriminator_accuracy"] = r.discriminator_accuracy;
  }
  return doc;
}

void write_training_log(const TrainingLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io.write", "cannot write " + path);
  for (const EpochRecord& r : log.epochs) out << to_json(r).dump() << '\n';
  if (!out) throw Error("io.write", "failed writing " + path);
}

// -- Checkpoints -----------------------------------------------------------

namespace {

std::vector<const nn::Param*> checkpoint_params(const TrainedModel& model) {
  std::vector<const nn::Param*> params = model.backbone.params();
  params.push_back(&model.head_n.linear.weight);
  params.push_back(&model.head_n.linear.bias);
  if (model.head_p) {
    params.push_back(&model.head_p->linear.weight);
    params.push_back(&model.head_p->linear.bias);
  }
  return params;
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::string& path) {
  json header{{"format", "styleshift-checkpoint"},
              {"scheme", model.scheme},
              {"num_classes", model.num_classes},
              {"resolution", model.resolution},
              {"config", to_json(model.config)},
              {"has_head_p", model.head_p.has_value()},
              {"warnings", model.log.warnings}};
  json params = json::array();
  for (const nn::Param* p : checkpoint_params(model)) {
    params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  header["params"] = params;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io.write", "cannot write " + path);
  out.write(kMagic, 4);
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  const std::uint64_t length = text.size();
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const nn::Param* p : checkpoint_params(model)) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw Error("io.write", "failed writing " + path);
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io.read", "cannot open checkpoint " + path);
  char magic[4] = {};
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error("checkpoint.format", path + " is not a styleshift checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw Error("checkpoint.format", "unsupported checkpoint version " + std::to_string(version));
  }
  if (length > (1u << 26)) throw Error("checkpoint.format", "checkpoint header too large");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw Error("checkpoint.format", "truncated checkpoint header");

  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("checkpoint.format", std::string("bad checkpoint header: ") + e.what());
  }

  TrainedModel model;
  model.scheme = header.at("scheme").get<std::string>();
  model.num_classes = header.at("num_classes").get<int>();
  model.resolution = header.at("resolution").get<int>();
  model.config = training_config_from_json(header.at("config"));
  model.log.warnings = header.value("warnings", std::vector<std::string>{});
  model.backbone = Backbone(model.config.backbone, 0);
  const int dim = model.backbone.feature_dim();
  model.head_n.domain = Domain::photo;
  model.head_n.linear = nn::Linear("head_n", dim, model.num_classes);
  if (header.at("has_head_p").get<bool>()) {
    ClassifierHead head_p;
    head_p.domain = Domain::painting;
    head_p.linear = nn::Linear("head_p", dim, model.num_classes);
    model.head_p = std::move(head_p);
  }

  std::vector<nn::Param*> targets = model.backbone.params();
  targets.push_back(&model.head_n.linear.weight);
  targets.push_back(&model.head_n.linear.bias);
  if (model.head_p) {
    targets.push_back(&model.head_p->linear.weight);
    targets.push_back(&model.head_p->linear.bias);
  }
  const json& params = header.at("params");
  if (params.size() != targets.size()) {
    throw Error("checkpoint.format", "parameter count does not match the architecture");
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    nn::Param& p = *targets[i];
    if (params[i].at("name").get<std::string>() != p.name ||
        params[i].at("rows").get<Eigen::Index>() != p.value.rows() ||
        params[i].at("cols").get<Eigen::Index>() != p.value.cols()) {
      throw Error("checkpoint.format", "parameter '" + p.name + "' does not match the header");
    }
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!in) throw Error("checkpoint.format", "truncated parameter data");
  }
  return model;
}

}  // namespace styleshift::training
