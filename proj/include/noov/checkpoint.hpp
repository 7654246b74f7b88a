#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "noov/error.hpp"
#include "noov/model.hpp"
#include "noov/text.hpp"

namespace noov {

// Layout: "NOOV" | u32 version | u32 header length | JSON header |
// little-endian f32 tensor data in manifest order.
inline constexpr char kCheckpointMagic[4] = {'N', 'O', 'O', 'V'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(k)]))
         << (8 * k);
  }
  return v;
}

inline nlohmann::json vocab_json(const Vocabulary& v) {
  return {{"tokens", v.tokens()}, {"counts", v.counts()}};
}

inline Vocabulary vocab_from_json(const nlohmann::json& j) {
  return Vocabulary::from_tokens(j.at("tokens").get<std::vector<Token>>(),
                                 j.at("counts").get<std::vector<std::int64_t>>());
}

inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double from_finite_or_null(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace detail

inline nlohmann::json model_config_json(const ModelConfig& c) {
  return {{"hidden_size", c.hidden_size}, {"embedding_size", c.embedding_size},
          {"layers", c.layers},           {"batch_size", c.batch_size},
          {"dropout", c.dropout},         {"grad_clip", c.grad_clip},
          {"lr", c.lr},                   {"max_epochs", c.max_epochs},
          {"patience", c.patience},       {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.hidden_size = j.at("hidden_size").get<int>();
  c.embedding_size = j.at("embedding_size").get<int>();
  c.layers = j.at("layers").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.lr = j.at("lr").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline std::string serialize_checkpoint(const ModelCheckpoint& ck) {
  nn::Parameters<float> params = ck.params;
  nlohmann::json manifest = nlohmann::json::array();
  std::string data;
  for (auto& t : params.tensors()) {
    manifest.push_back({{"name", t.name},
                        {"shape", {t.value->rows(), t.value->cols()}},
                        {"offset", data.size()}});
    for (Eigen::Index k = 0; k < t.value->size(); ++k) {
      detail::put_u32(data, std::bit_cast<std::uint32_t>(t.value->data()[k]));
    }
  }
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : ck.meta.history) {
    history.push_back({h.epoch, detail::finite_or_null(h.train_loss), detail::finite_or_null(h.dev_loss)});
  }
  const auto& a = ck.params.arch;
  nlohmann::json header = {
      {"format", "noov-checkpoint"},
      {"config", model_config_json(ck.config)},
      {"architecture",
       {{"source_vocab", a.source_vocab},
        {"target_vocab", a.target_vocab},
        {"embedding", a.embedding},
        {"hidden", a.hidden},
        {"layers", a.layers},
        {"attention", a.attention}}},
      {"source_vocab", detail::vocab_json(ck.source_vocab)},
      {"target_vocab", detail::vocab_json(ck.target_vocab)},
      {"tensors", manifest},
      {"data_bytes", data.size()},
      {"meta",
       {{"epoch", ck.meta.epoch},
        {"dev_loss", detail::finite_or_null(ck.meta.dev_loss)},
        {"history", history}}}};
  const std::string hdr = header.dump();
  std::string out(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(hdr.size()));
  out += hdr;
  out += data;
  return out;
}

inline ModelCheckpoint deserialize_checkpoint(const std::string& bytes, const std::string& what = "checkpoint") {
  if (bytes.size() < 12) throw FormatError(what + ": truncated (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError(what + ": bad magic, not a NOOV checkpoint");
  }
  const std::uint32_t version = detail::get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t hdr_len = detail::get_u32(bytes, 8);
  if (bytes.size() < 12 + hdr_len) throw FormatError(what + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(hdr_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": malformed header: " + e.what());
  }
  const std::size_t data_start = 12 + hdr_len;
  try {
    ModelCheckpoint ck;
    ck.config = model_config_from_json(header.at("config"));
    ck.source_vocab = detail::vocab_from_json(header.at("source_vocab"));
    ck.target_vocab = detail::vocab_from_json(header.at("target_vocab"));
    const auto& aj = header.at("architecture");
    nn::Architecture a;
    a.source_vocab = aj.at("source_vocab").get<int>();
    a.target_vocab = aj.at("target_vocab").get<int>();
    a.embedding = aj.at("embedding").get<int>();
    a.hidden = aj.at("hidden").get<int>();
    a.layers = aj.at("layers").get<int>();
    a.attention = aj.at("attention").get<int>();
    if (static_cast<std::size_t>(a.source_vocab) != ck.source_vocab.size() ||
        static_cast<std::size_t>(a.target_vocab) != ck.target_vocab.size()) {
      throw FormatError(what + ": vocabulary sizes disagree with the architecture");
    }
    const std::size_t data_bytes = header.at("data_bytes").get<std::size_t>();
    if (bytes.size() != data_start + data_bytes) {
      throw FormatError(what + ": truncated or oversized tensor data (expected " +
                        std::to_string(data_bytes) + " bytes, found " +
                        std::to_string(bytes.size() - std::min(bytes.size(), data_start)) + ")");
    }
    ck.params = nn::Parameters<float>::zeros(a);
    auto tensors = ck.params.tensors();
    const auto& manifest = header.at("tensors");
    if (manifest.size() != tensors.size()) throw FormatError(what + ": tensor manifest size mismatch");
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      const auto& m = manifest[k];
      auto& t = tensors[k];
      const auto shape = m.at("shape").get<std::vector<Eigen::Index>>();
      if (m.at("name").get<std::string>() != t.name || shape.size() != 2 ||
          shape[0] != t.value->rows() || shape[1] != t.value->cols()) {
        throw FormatError(what + ": tensor '" + t.name + "' missing or misshapen in manifest");
      }
      const std::size_t offset = m.at("offset").get<std::size_t>();
      if (offset + 4 * static_cast<std::size_t>(t.value->size()) > data_bytes) {
        throw FormatError(what + ": tensor '" + t.name + "' exceeds the data section");
      }
      for (Eigen::Index i = 0; i < t.value->size(); ++i) {
        t.value->data()[i] = std::bit_cast<float>(
            detail::get_u32(bytes, data_start + offset + 4 * static_cast<std::size_t>(i)));
      }
    }
    const auto& meta = header.at("meta");
    ck.meta.epoch = meta.at("epoch").get<int>();
    ck.meta.dev_loss = detail::from_finite_or_null(meta.at("dev_loss"));
    for (const auto& h : meta.at("history")) {
      ck.meta.history.push_back({h.at(0).get<int>(), detail::from_finite_or_null(h.at(1)),
                                 detail::from_finite_or_null(h.at(2))});
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": header is missing fields: " + e.what());
  }
}

inline void save_checkpoint(const ModelCheckpoint& ck, const std::string& path) {
  text::write_file(path, serialize_checkpoint(ck));
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(text::read_file(path), path);
}

}  // namespace noov
