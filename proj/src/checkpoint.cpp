#include "gnr/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace gnr::textenc {

namespace {

constexpr const char* kFormat = "gnr-weights-v1";

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f64(const std::string& in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& prefix) {
  return prefix.string() + ".manifest.json";
}

std::filesystem::path blob_path(const std::filesystem::path& prefix) { return prefix.string() + ".weights.bin"; }

void save_checkpoint(const std::filesystem::path& prefix, const std::string& kind, const nlohmann::json& header,
                     const nn::ConstParamRefs& params) {
  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto* p : params) {
    tensors.push_back({{"name", p->name},
                       {"shape", {p->value.rows(), p->value.cols()}},
                       {"offset", blob.size()}});
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) put_f64(blob, p->value(r, c));
    }
  }
  nlohmann::json manifest = {{"format", kFormat},
                             {"kind", kind},
                             {"header", header},
                             {"tensors", tensors},
                             {"blob_bytes", blob.size()}};
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  std::ofstream mout(manifest_path(prefix), std::ios::binary);
  std::ofstream bout(blob_path(prefix), std::ios::binary);
  if (!mout || !bout) throw DataError("cannot write checkpoint " + prefix.string());
  mout << manifest.dump(2) << '\n';
  bout.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!mout || !bout) throw DataError("short write for checkpoint " + prefix.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& prefix, const std::string& expected_kind) {
  std::ifstream min(manifest_path(prefix), std::ios::binary);
  if (!min) throw DataError("cannot open " + manifest_path(prefix).string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(min);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint manifest " + manifest_path(prefix).string() + ": " + e.what());
  }
  std::ifstream bin(blob_path(prefix), std::ios::binary);
  if (!bin) throw DataError("cannot open " + blob_path(prefix).string());
  const std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  Checkpoint ck;
  try {
    if (manifest.at("format") != kFormat) throw DataError("unsupported checkpoint format");
    ck.kind = manifest.at("kind").get<std::string>();
    if (ck.kind != expected_kind) {
      throw DataError("checkpoint " + prefix.string() + " holds a " + ck.kind + " model, expected " + expected_kind);
    }
    const auto blob_bytes = manifest.at("blob_bytes").get<std::size_t>();
    if (blob.size() != blob_bytes) {
      throw DataError("checkpoint blob " + blob_path(prefix).string() + " has " + std::to_string(blob.size()) +
                      " bytes, manifest declares " + std::to_string(blob_bytes));
    }
    ck.header = manifest.at("header");
    for (const auto& t : manifest.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("shape").at(0).get<Eigen::Index>();
      const auto cols = t.at("shape").at(1).get<Eigen::Index>();
      const auto offset = t.at("offset").get<std::size_t>();
      const auto bytes = static_cast<std::size_t>(rows * cols) * 8;
      if (rows < 0 || cols < 0 || offset + bytes > blob.size()) {
        throw DataError("tensor " + name + " extends past the end of the checkpoint blob");
      }
      Matrix m(rows, cols);
      std::size_t pos = offset;
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c, pos += 8) m(r, c) = get_f64(blob, pos);
      }
      ck.tensors.push_back({name, std::move(m)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint manifest " + manifest_path(prefix).string() + ": " + e.what());
  }
  return ck;
}

void assign_tensors(const Checkpoint& checkpoint, const nn::ParamRefs& params) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& t : checkpoint.tensors) by_name[t.name] = &t.value;
  if (by_name.size() != params.size()) {
    throw ShapeError("checkpoint has " + std::to_string(by_name.size()) + " tensors, model expects " +
                     std::to_string(params.size()));
  }
  for (const auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ShapeError("checkpoint is missing tensor " + p->name);
    const Matrix& m = *it->second;
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw ShapeError("tensor " + p->name + " has shape [" + std::to_string(m.rows()) + ", " +
                       std::to_string(m.cols()) + "], config expects [" + std::to_string(p->value.rows()) + ", " +
                       std::to_string(p->value.cols()) + "]");
    }
    if (!m.allFinite()) throw DataError("tensor " + p->name + " contains non-finite values");
  }
  for (auto* p : params) {
    p->value = *by_name.at(p->name);
    p->grad.setZero();
  }
}

}  // namespace gnr::textenc
