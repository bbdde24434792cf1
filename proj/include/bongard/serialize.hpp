#pragma once

// JSON forms of the model and training configurations (used by checkpoints and config files).

#include "bongard/encoder.hpp"
#include "bongard/optim.hpp"
#include "bongard/transformer.hpp"
#include "json.hpp"

namespace bongard {

inline nlohmann::json to_json(const MimicConfig& c) {
  return {{"mode", std::string(mode_name(c.mode))}, {"depth", c.depth},         {"heads", c.heads},
          {"head_dim", c.head_dim},                 {"token_dim", c.token_dim}, {"mlp_dim", c.mlp_dim},
          {"ln_eps", c.ln_eps},                     {"embed_init_std", c.embed_init_std}};
}

inline MimicConfig mimic_config_from_json(const nlohmann::json& j, MimicConfig c = {}) {
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  c.depth = j.value("depth", c.depth);
  c.heads = j.value("heads", c.heads);
  c.head_dim = j.value("head_dim", c.head_dim);
  c.token_dim = j.value("token_dim", c.token_dim);
  c.mlp_dim = j.value("mlp_dim", c.mlp_dim);
  c.ln_eps = j.value("ln_eps", c.ln_eps);
  c.embed_init_std = j.value("embed_init_std", c.embed_init_std);
  c.validate();
  return c;
}

inline nlohmann::json to_json(const EncoderConfig& c) {
  return {{"raw_dim", c.raw_dim}, {"hidden_dim", c.hidden_dim}, {"feature_dim", c.feature_dim}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j, EncoderConfig c = {}) {
  c.raw_dim = j.value("raw_dim", c.raw_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"max_lr", c.max_lr},
          {"warmup_frac", c.warmup_frac},
          {"total_steps", c.total_steps},
          {"batch_size", c.batch_size},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed},
          {"noise_gate_prob", c.noise_gate_prob},
          {"dropout_enabled", c.dropout_enabled},
          {"svm_C", c.svm_C},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  c.max_lr = j.value("max_lr", c.max_lr);
  c.warmup_frac = j.value("warmup_frac", c.warmup_frac);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.noise_gate_prob = j.value("noise_gate_prob", c.noise_gate_prob);
  c.dropout_enabled = j.value("dropout_enabled", c.dropout_enabled);
  c.svm_C = j.value("svm_C", c.svm_C);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.validate();
  return c;
}

}  // namespace bongard
