// SPDX-License-Identifier: Apache-2.0
#pragma once

//
// On-disk model format: a directory holding manifest.json plus one binary
// blob per matrix. Blobs are float32, row-major, little-endian. A
// column-sparse matrix stores only its live columns (ascending id order),
// so structured pruning shows up directly in file size. Writes go through
// a temp file and a rename, so a crash never leaves a half-written file
// under the final name.
//

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "losparse/errors.hpp"
#include "losparse/factorized.hpp"
#include "losparse/matrix.hpp"
#include "losparse/model.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");

namespace losparse {

inline constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline void write_file_atomic(const std::filesystem::path& path,
                              const char* data, std::size_t bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(data, static_cast<std::streamsize>(bytes));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& text) {
  write_file_atomic(path, text.data(), text.size());
}

// Row-major float32 image of the matrix, restricted to the given columns.
inline std::vector<float> to_float32_columns(
    const DenseMatrix& m, const std::vector<std::size_t>& columns) {
  std::vector<float> out;
  out.reserve(m.rows() * columns.size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j : columns) out.push_back(static_cast<float>(m(i, j)));
  return out;
}

inline std::vector<float> to_float32(const DenseMatrix& m) {
  std::vector<float> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    out[i] = static_cast<float>(m.data()[i]);
  return out;
}

inline void write_blob(const std::filesystem::path& path,
                       const std::vector<float>& values) {
  write_file_atomic(path, reinterpret_cast<const char*>(values.data()),
                    values.size() * sizeof(float));
}

inline std::vector<float> read_blob(const std::filesystem::path& path,
                                    std::size_t expected_count,
                                    const std::string& name) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(float)) {
    throw FormatError("manifest matrix " + name + ": blob_file holds " +
                      std::to_string(bytes) + " bytes, expected " +
                      std::to_string(expected_count * sizeof(float)));
  }
  std::vector<float> values(expected_count);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read from " + path.string());
  return values;
}

inline std::vector<std::size_t> live_ids(const std::vector<std::uint8_t>& mask) {
  std::vector<std::size_t> ids;
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) ids.push_back(j);
  return ids;
}

inline nlohmann::json matrix_entry(const std::string& name,
                                   const std::string& kind, std::size_t rows,
                                   std::size_t cols) {
  nlohmann::json e;
  e["name"] = name;
  e["kind"] = kind;
  e["rows"] = rows;
  e["cols"] = cols;
  e["blob_file"] = name + ".bin";
  e["dtype"] = "float32";
  e["layout"] = "row-major";
  e["endianness"] = "little";
  return e;
}

}  // namespace detail

// Write the model under dir as manifest.json plus one blob per matrix.
// Dense layers with every column live store the full matrix as kind
// "dense"; pruned ones store live columns only, like the sparse part of a
// factorized layer. Biases ride along as 1-row matrices.
inline void save_checkpoint(const ToyModel& model,
                            const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["matrices"] = nlohmann::json::array();

  auto emit = [&](nlohmann::json entry, const std::vector<float>& values) {
    detail::write_blob(dir / entry["blob_file"].get<std::string>(), values);
    manifest["matrices"].push_back(std::move(entry));
  };

  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const ModelLayer& layer = model.layers[l];
    const std::string base = "layer" + std::to_string(l);
    if (layer.kind == LayerKind::kDense) {
      const std::vector<std::size_t> ids = detail::live_ids(layer.weight_live);
      if (ids.size() == layer.out_dim()) {
        emit(detail::matrix_entry(base + ".weight", "dense",
                                  layer.in_dim(), layer.out_dim()),
             detail::to_float32(layer.weight));
      } else {
        nlohmann::json e = detail::matrix_entry(base + ".weight",
                                                "sparse_columns",
                                                layer.in_dim(), layer.out_dim());
        e["live_column_ids"] = ids;
        emit(std::move(e), detail::to_float32_columns(layer.weight, ids));
      }
    } else {
      const FactorizedLayer& f = layer.factors;
      nlohmann::json u = detail::matrix_entry(base + ".U", "factor_u",
                                              f.d1(), f.rank);
      u["rank"] = f.rank;
      emit(std::move(u), detail::to_float32(f.U));
      nlohmann::json v = detail::matrix_entry(base + ".V", "factor_v",
                                              f.rank, f.d2());
      v["rank"] = f.rank;
      emit(std::move(v), detail::to_float32(f.V));
      nlohmann::json s = detail::matrix_entry(base + ".S", "sparse_columns",
                                              f.d1(), f.d2());
      const std::vector<std::size_t> ids = detail::live_ids(f.live_columns);
      s["live_column_ids"] = ids;
      emit(std::move(s), detail::to_float32_columns(f.S, ids));
    }
    DenseMatrix b(1, layer.out_dim());
    for (std::size_t j = 0; j < layer.out_dim(); ++j) b(0, j) = layer.bias[j];
    emit(detail::matrix_entry(base + ".bias", "bias", 1, layer.out_dim()),
         detail::to_float32(b));
  }

  detail::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace detail {

// Typed field access with errors that name the offending field.
template <typename T>
T manifest_field(const nlohmann::json& entry, const std::string& name,
                 const std::string& key) {
  if (!entry.contains(key)) {
    throw FormatError("manifest matrix " + name + ": missing field " + key);
  }
  try {
    return entry.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("manifest matrix " + name + ": field " + key +
                      " has the wrong type");
  }
}

struct LoadedMatrix {
  std::string kind;
  DenseMatrix values;            // full logical shape, zeros where dead
  std::vector<std::uint8_t> live;  // sparse kind only
  std::size_t rank = 0;          // factor kinds only
};

inline LoadedMatrix load_matrix(const std::filesystem::path& dir,
                                const nlohmann::json& entry,
                                const std::string& name) {
  LoadedMatrix m;
  m.kind = manifest_field<std::string>(entry, name, "kind");
  const auto rows = manifest_field<std::size_t>(entry, name, "rows");
  const auto cols = manifest_field<std::size_t>(entry, name, "cols");
  if (rows == 0 || cols == 0) {
    throw FormatError("manifest matrix " + name + ": rows/cols must be positive");
  }
  if (manifest_field<std::string>(entry, name, "dtype") != "float32") {
    throw FormatError("manifest matrix " + name + ": dtype must be float32");
  }
  if (manifest_field<std::string>(entry, name, "layout") != "row-major") {
    throw FormatError("manifest matrix " + name + ": layout must be row-major");
  }
  if (manifest_field<std::string>(entry, name, "endianness") != "little") {
    throw FormatError("manifest matrix " + name + ": endianness must be little");
  }
  const auto blob = manifest_field<std::string>(entry, name, "blob_file");

  m.values = DenseMatrix(rows, cols);
  if (m.kind == "sparse_columns") {
    const auto ids =
        manifest_field<std::vector<std::size_t>>(entry, name, "live_column_ids");
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k] >= cols) {
        throw FormatError("manifest matrix " + name +
                          ": live_column_ids entry " + std::to_string(ids[k]) +
                          " is out of range");
      }
      if (k > 0 && ids[k] <= ids[k - 1]) {
        throw FormatError("manifest matrix " + name +
                          ": live_column_ids must be strictly ascending");
      }
    }
    const std::vector<float> v = read_blob(dir / blob, rows * ids.size(), name);
    m.live.assign(cols, 0);
    for (std::size_t k = 0; k < ids.size(); ++k) m.live[ids[k]] = 1;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = 0; k < ids.size(); ++k)
        m.values(i, ids[k]) = static_cast<double>(v[i * ids.size() + k]);
  } else if (m.kind == "dense" || m.kind == "factor_u" ||
             m.kind == "factor_v" || m.kind == "bias") {
    const std::vector<float> v = read_blob(dir / blob, rows * cols, name);
    for (std::size_t i = 0; i < m.values.size(); ++i)
      m.values.data()[i] = static_cast<double>(v[i]);
    if (m.kind == "factor_u" || m.kind == "factor_v") {
      m.rank = manifest_field<std::size_t>(entry, name, "rank");
      const std::size_t expect = m.kind == "factor_u" ? cols : rows;
      if (m.rank != expect) {
        throw FormatError("manifest matrix " + name +
                          ": rank does not match the factor shape");
      }
    }
  } else {
    throw FormatError("manifest matrix " + name + ": unknown kind " + m.kind);
  }
  return m;
}

}  // namespace detail

inline nlohmann::json load_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json is not valid JSON: " +
                      std::string(e.what()));
  }
  if (!manifest.contains("format_version") ||
      manifest["format_version"] != kCheckpointFormatVersion) {
    throw FormatError("manifest field format_version must be " +
                      std::to_string(kCheckpointFormatVersion));
  }
  if (!manifest.contains("matrices") || !manifest["matrices"].is_array()) {
    throw FormatError("manifest field matrices must be an array");
  }
  return manifest;
}

// Rebuild a model from a checkpoint directory. Layer membership comes from
// the matrix names (layer<N>.weight / .U / .V / .S / .bias); a layer is
// dense or factorized depending on which of those it carries.
inline ToyModel load_checkpoint(const std::filesystem::path& dir) {
  const nlohmann::json manifest = load_manifest(dir);

  struct Parts {
    std::unique_ptr<detail::LoadedMatrix> weight, u, v, s, bias;
  };
  std::map<std::size_t, Parts> layers;

  for (const nlohmann::json& entry : manifest["matrices"]) {
    if (!entry.contains("name") || !entry["name"].is_string()) {
      throw FormatError("manifest matrix entry: missing field name");
    }
    const auto name = entry["name"].get<std::string>();
    const auto dot = name.find('.');
    std::size_t index = 0;
    bool named = name.rfind("layer", 0) == 0 && dot != std::string::npos;
    if (named) {
      try {
        index = std::stoul(name.substr(5, dot - 5));
      } catch (...) {
        named = false;
      }
    }
    if (!named) {
      throw FormatError("manifest matrix " + name +
                        ": name must look like layer<N>.<part>");
    }
    const std::string part = name.substr(dot + 1);
    auto loaded = std::make_unique<detail::LoadedMatrix>(
        detail::load_matrix(dir, entry, name));
    Parts& p = layers[index];
    auto place = [&](std::unique_ptr<detail::LoadedMatrix>& slot) {
      if (slot) {
        throw FormatError("manifest matrix " + name + ": duplicate entry");
      }
      slot = std::move(loaded);
    };
    if (part == "weight") place(p.weight);
    else if (part == "U") place(p.u);
    else if (part == "V") place(p.v);
    else if (part == "S") place(p.s);
    else if (part == "bias") place(p.bias);
    else {
      throw FormatError("manifest matrix " + name + ": unknown part " + part);
    }
  }
  if (layers.empty()) throw FormatError("manifest lists no matrices");

  ToyModel model;
  std::size_t expect = 0;
  for (auto& [index, p] : layers) {
    const std::string base = "layer" + std::to_string(index);
    if (index != expect++) {
      throw FormatError("manifest matrix " + base + ": layer indices must be "
                        "contiguous from 0");
    }
    ModelLayer layer;
    if (p.weight) {
      if (p.u || p.v || p.s) {
        throw FormatError("manifest matrix " + base +
                          ".weight: layer cannot be both dense and factorized");
      }
      layer.kind = LayerKind::kDense;
      layer.weight = std::move(p.weight->values);
      layer.weight_live = p.weight->kind == "sparse_columns"
                              ? std::move(p.weight->live)
                              : std::vector<std::uint8_t>(layer.weight.cols(), 1);
    } else {
      if (!p.u || !p.v || !p.s) {
        throw FormatError("manifest matrix " + base +
                          ": factorized layer needs U, V and S");
      }
      if (p.s->kind != "sparse_columns") {
        throw FormatError("manifest matrix " + base +
                          ".S: kind must be sparse_columns");
      }
      layer.kind = LayerKind::kFactorized;
      layer.factors.rank = p.u->rank;
      if (p.v->rank != p.u->rank || p.u->values.cols() != p.v->values.rows()) {
        throw FormatError("manifest matrix " + base +
                          ".V: factor ranks disagree");
      }
      if (p.u->values.rows() != p.s->values.rows() ||
          p.v->values.cols() != p.s->values.cols()) {
        throw FormatError("manifest matrix " + base +
                          ".S: shape disagrees with the factors");
      }
      layer.factors.U = std::move(p.u->values);
      layer.factors.V = std::move(p.v->values);
      layer.factors.S = std::move(p.s->values);
      layer.factors.live_columns = std::move(p.s->live);
    }
    if (!p.bias) {
      throw FormatError("manifest matrix " + base + ": missing bias");
    }
    if (p.bias->values.rows() != 1 ||
        p.bias->values.cols() != layer.out_dim()) {
      throw FormatError("manifest matrix " + base +
                        ".bias: shape must be 1 x out_dim");
    }
    layer.bias.assign(p.bias->values.data(),
                      p.bias->values.data() + layer.out_dim());
    model.layers.push_back(std::move(layer));
  }

  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
    if (model.layers[l].out_dim() != model.layers[l + 1].in_dim()) {
      throw FormatError("manifest matrix layer" + std::to_string(l + 1) +
                        ": in_dim disagrees with the previous layer");
    }
  }
  return model;
}

}  // namespace losparse
