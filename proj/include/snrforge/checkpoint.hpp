#pragma once

// Checkpoints: <prefix>.bin holds little-endian float64 values (params, then Adam
// first and second moments); <prefix>.json describes shapes, config and step.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snrforge/config.hpp"
#include "snrforge/errors.hpp"
#include "snrforge/mlp.hpp"
#include "snrforge/rng.hpp"
#include "snrforge/train.hpp"

namespace snrforge {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointPaths {
  std::filesystem::path blob;
  std::filesystem::path sidecar;
};

inline CheckpointPaths checkpoint_paths(const std::filesystem::path &prefix) {
  return {prefix.string() + ".bin", prefix.string() + ".json"};
}

namespace checkpoint_detail {

inline void write_f64_le(std::ofstream &os, std::span<const double> values) {
  std::vector<unsigned char> buf(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      buf[i * 8 + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
    }
  }
  os.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline ParamVector read_f64_le(std::ifstream &is, std::size_t count) {
  std::vector<unsigned char> buf(count * 8);
  is.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) {
    throw domain_error("checkpoint: blob is truncated");
  }
  ParamVector out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(buf[i * 8 + static_cast<std::size_t>(b)]) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

} // namespace checkpoint_detail

inline nlohmann::json checkpoint_sidecar(const TrainState &state) {
  const auto &c = state.config.model;
  const auto in = c.input_dim();
  const auto n = state.params.values.size();
  return {
      {"format", "snrforge-checkpoint"},
      {"version", kCheckpointVersion},
      {"dtype", "float64-le"},
      {"step", state.step},
      {"config", to_json(state.config)},
      {"layers",
       nlohmann::json::array({{{"name", "w1"}, {"shape", {c.hidden, in}}},
                              {{"name", "b1"}, {"shape", {c.hidden}}},
                              {{"name", "w2"}, {"shape", {c.hidden, c.hidden}}},
                              {{"name", "b2"}, {"shape", {c.hidden}}},
                              {{"name", "w3"}, {"shape", {2, c.hidden}}},
                              {{"name", "b3"}, {"shape", {2}}}})},
      {"layout", "column-major"},
      {"segments", nlohmann::json::array({{{"name", "params"}, {"offset", 0}, {"count", n}},
                                          {{"name", "adam_m"}, {"offset", n}, {"count", n}},
                                          {{"name", "adam_v"}, {"offset", 2 * n}, {"count", n}}})},
      {"rng",
       {{"data", engine_state(state.data_rng)},
        {"time", engine_state(state.time_rng)},
        {"noise", engine_state(state.noise_rng)}}},
  };
}

inline void save_checkpoint(const TrainState &state, const std::filesystem::path &prefix) {
  const auto paths = checkpoint_paths(prefix);
  std::ofstream blob(paths.blob, std::ios::binary | std::ios::trunc);
  if (!blob) {
    throw domain_error("checkpoint: cannot write " + paths.blob.string());
  }
  checkpoint_detail::write_f64_le(blob, state.params.values);
  checkpoint_detail::write_f64_le(blob, state.adam_m);
  checkpoint_detail::write_f64_le(blob, state.adam_v);

  std::ofstream side(paths.sidecar, std::ios::trunc);
  if (!side) {
    throw domain_error("checkpoint: cannot write " + paths.sidecar.string());
  }
  side << checkpoint_sidecar(state).dump(2) << '\n';
}

inline TrainState load_checkpoint(const std::filesystem::path &prefix) {
  const auto paths = checkpoint_paths(prefix);
  std::ifstream side(paths.sidecar);
  if (!side) {
    throw domain_error("checkpoint: cannot read " + paths.sidecar.string());
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(side);
  } catch (const nlohmann::json::exception &e) {
    throw parse_error(std::string("checkpoint: malformed sidecar: ") + e.what());
  }
  if (meta.value("format", "") != "snrforge-checkpoint" ||
      meta.value("version", 0) != kCheckpointVersion) {
    throw parse_error("checkpoint: unsupported sidecar format");
  }
  TrainState state = make_train_state(train_config_from_json(meta.at("config"), "checkpoint"));
  state.step = meta.at("step").get<std::int64_t>();
  const auto n = state.params.values.size();

  std::ifstream blob(paths.blob, std::ios::binary);
  if (!blob) {
    throw domain_error("checkpoint: cannot read " + paths.blob.string());
  }
  state.params.values = checkpoint_detail::read_f64_le(blob, n);
  state.adam_m = checkpoint_detail::read_f64_le(blob, n);
  state.adam_v = checkpoint_detail::read_f64_le(blob, n);

  const auto &rng = meta.at("rng");
  state.data_rng = engine_from_state(rng.at("data").get<std::string>());
  state.time_rng = engine_from_state(rng.at("time").get<std::string>());
  state.noise_rng = engine_from_state(rng.at("noise").get<std::string>());
  return state;
}

} // namespace snrforge
