#include "drn/config_json.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace drn {

namespace {

void expect_keys(const json& j, const std::string& where,
                 std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValueError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ValueError(where + ": unknown config field '" + key + "'");
  }
}

template <class T>
void get_if(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValueError(where + "." + key + ": wrong type");
  }
}

}  // namespace

json to_json(const ModelConfig& m) {
  return json{{"d", m.d},
              {"n_blocks", m.n_blocks},
              {"n_heads", m.n_heads},
              {"ffn_hidden", m.ffn_hidden},
              {"T", m.T},
              {"vocab_size", m.vocab_size},
              {"k", m.k},
              {"positional_encodings", m.positional_encodings},
              {"attention_temperature", m.attention_temperature}};
}

json to_json(const DataConfig& d) {
  return json{{"data_seed", d.data_seed},
              {"n_train", d.n_train},
              {"n_test", d.n_test},
              {"rho_train", d.rho_train},
              {"rho_test", d.rho_test},
              {"val_fraction", d.val_fraction},
              {"n_association", d.n_association},
              {"n_distractor", d.n_distractor}};
}

json to_json(const LossConfig& l) {
  return json{{"lambda_rank", l.lambda_rank},
              {"lambda_sep", l.lambda_sep},
              {"lambda_attn", l.lambda_attn},
              {"margin_uncertainty", l.margin_uncertainty},
              {"margin_separation", l.margin_separation},
              {"enable_rank", l.enable_rank},
              {"enable_sep", l.enable_sep},
              {"enable_attn", l.enable_attn}};
}

json to_json(const OptimizerConfig& o) {
  return json{{"learning_rate", o.learning_rate}, {"beta1", o.beta1},
              {"beta2", o.beta2},                 {"epsilon", o.epsilon},
              {"batch_size", o.batch_size},       {"steps", o.steps},
              {"eval_every", o.eval_every}};
}

json to_json(const ExperimentConfig& c) {
  return json{{"seed", c.seed},
              {"variant", variant_name(c.variant)},
              {"model", to_json(c.model)},
              {"data", to_json(c.data)},
              {"loss", to_json(c.loss)},
              {"optimizer", to_json(c.optimizer)}};
}

json to_json(const puzzles::GeneratorConfig& g) {
  return json{{"seed", g.seed},
              {"n_puzzles", g.n_puzzles},
              {"vocab_size", g.vocab_size},
              {"n_association", g.n_association},
              {"n_distractor", g.n_distractor},
              {"agreement_rate", g.agreement_rate},
              {"k", g.k}};
}

json to_json(const Metrics& m) {
  json j{{"n", m.n},
         {"n_trap", m.n_trap},
         {"n_nontrap", m.n_nontrap},
         {"accuracy", m.accuracy},
         {"accuracy_trap", m.accuracy_trap},
         {"accuracy_nontrap", m.accuracy_nontrap}};
  if (m.mean_sigma2_chosen) j["mean_sigma2_chosen"] = *m.mean_sigma2_chosen;
  if (m.mean_sigma2_rejected) j["mean_sigma2_rejected"] = *m.mean_sigma2_rejected;
  json curve = json::array();
  for (const CurvePoint& p : m.curve) {
    curve.push_back(json{{"step", p.step},
                         {"train_loss", p.train_loss},
                         {"val_accuracy", p.val_accuracy},
                         {"val_accuracy_trap", p.val_accuracy_trap}});
  }
  j["curve"] = std::move(curve);
  return j;
}

json to_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const AblationRow& r : rows) {
    out.push_back(json{{"variant", r.variant},
                       {"trap_accuracy", r.trap_accuracy},
                       {"overall_accuracy", r.overall_accuracy},
                       {"mean_trap_accuracy", r.mean_trap},
                       {"std_trap_accuracy", r.std_trap}});
  }
  return out;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  expect_keys(j, "model",
              {"d", "n_blocks", "n_heads", "ffn_hidden", "T", "vocab_size", "k",
               "positional_encodings", "attention_temperature"});
  get_if(j, "d", m.d, "model");
  get_if(j, "n_blocks", m.n_blocks, "model");
  get_if(j, "n_heads", m.n_heads, "model");
  get_if(j, "ffn_hidden", m.ffn_hidden, "model");
  get_if(j, "T", m.T, "model");
  get_if(j, "vocab_size", m.vocab_size, "model");
  get_if(j, "k", m.k, "model");
  get_if(j, "positional_encodings", m.positional_encodings, "model");
  get_if(j, "attention_temperature", m.attention_temperature, "model");
  return m;
}

DataConfig data_config_from_json(const json& j) {
  DataConfig d;
  expect_keys(j, "data",
              {"data_seed", "n_train", "n_test", "rho_train", "rho_test", "val_fraction",
               "n_association", "n_distractor"});
  get_if(j, "data_seed", d.data_seed, "data");
  get_if(j, "n_train", d.n_train, "data");
  get_if(j, "n_test", d.n_test, "data");
  get_if(j, "rho_train", d.rho_train, "data");
  get_if(j, "rho_test", d.rho_test, "data");
  get_if(j, "val_fraction", d.val_fraction, "data");
  get_if(j, "n_association", d.n_association, "data");
  get_if(j, "n_distractor", d.n_distractor, "data");
  return d;
}

LossConfig loss_config_from_json(const json& j) {
  LossConfig l;
  expect_keys(j, "loss",
              {"lambda_rank", "lambda_sep", "lambda_attn", "margin_uncertainty",
               "margin_separation", "enable_rank", "enable_sep", "enable_attn"});
  get_if(j, "lambda_rank", l.lambda_rank, "loss");
  get_if(j, "lambda_sep", l.lambda_sep, "loss");
  get_if(j, "lambda_attn", l.lambda_attn, "loss");
  get_if(j, "margin_uncertainty", l.margin_uncertainty, "loss");
  get_if(j, "margin_separation", l.margin_separation, "loss");
  get_if(j, "enable_rank", l.enable_rank, "loss");
  get_if(j, "enable_sep", l.enable_sep, "loss");
  get_if(j, "enable_attn", l.enable_attn, "loss");
  return l;
}

OptimizerConfig optimizer_config_from_json(const json& j) {
  OptimizerConfig o;
  expect_keys(j, "optimizer",
              {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "steps", "eval_every"});
  get_if(j, "learning_rate", o.learning_rate, "optimizer");
  get_if(j, "beta1", o.beta1, "optimizer");
  get_if(j, "beta2", o.beta2, "optimizer");
  get_if(j, "epsilon", o.epsilon, "optimizer");
  get_if(j, "batch_size", o.batch_size, "optimizer");
  get_if(j, "steps", o.steps, "optimizer");
  get_if(j, "eval_every", o.eval_every, "optimizer");
  return o;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  expect_keys(j, "experiment", {"seed", "variant", "model", "data", "loss", "optimizer"});
  get_if(j, "seed", c.seed, "experiment");
  if (j.contains("variant")) c.variant = variant_from_name(j.at("variant").get<std::string>());
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("data")) c.data = data_config_from_json(j.at("data"));
  if (j.contains("loss")) c.loss = loss_config_from_json(j.at("loss"));
  if (j.contains("optimizer")) c.optimizer = optimizer_config_from_json(j.at("optimizer"));
  validate(c);
  return c;
}

puzzles::GeneratorConfig generator_config_from_json(const json& j) {
  puzzles::GeneratorConfig g;
  expect_keys(j, "generator",
              {"seed", "n_puzzles", "vocab_size", "n_association", "n_distractor",
               "agreement_rate", "k"});
  get_if(j, "seed", g.seed, "generator");
  get_if(j, "n_puzzles", g.n_puzzles, "generator");
  get_if(j, "vocab_size", g.vocab_size, "generator");
  get_if(j, "n_association", g.n_association, "generator");
  get_if(j, "n_distractor", g.n_distractor, "generator");
  get_if(j, "agreement_rate", g.agreement_rate, "generator");
  get_if(j, "k", g.k, "generator");
  puzzles::validate(g);
  return g;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("failed reading " + path);
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out.good()) throw IoError("failed writing " + path);
}

namespace {

json parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValueError(path + ": invalid JSON: " + e.what());
  }
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from_json(parse_json_file(path));
}

puzzles::GeneratorConfig load_generator_config(const std::string& path) {
  return generator_config_from_json(parse_json_file(path));
}

std::string config_hash(const json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : dump) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace drn
