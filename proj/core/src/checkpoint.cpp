#include "barfiq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "barfiq/errors.hpp"

namespace barfiq::checkpoint {

namespace {

constexpr char kMagic[4] = {'B', 'A', 'R', 'Q'};

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw DataError("checkpoint truncated");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

std::map<std::string, const Tensor*> entries_of(const ParameterSet& params) {
  std::map<std::string, const Tensor*> all;
  for (const auto& [name, v] : params.params()) all.emplace(name, &v.value());
  for (const auto& [name, t] : params.buffers())
    if (!all.emplace(name, &t).second) throw ConfigError("buffer name collides with parameter: " + name);
  return all;
}

}  // namespace

void save(const ParameterSet& params, std::ostream& out) {
  const auto all = entries_of(params);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(all.size()));
  for (const auto& [name, t] : all) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, t->rows());
    put<std::uint64_t>(out, t->cols());
    for (double x : t->data()) put<double>(out, x);
  }
  if (!out) throw DataError("checkpoint write failed");
}

void save(const ParameterSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  save(params, out);
}

void load(ParameterSet& params, std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a BARQ checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in);

  std::map<std::string, Tensor*> targets;
  for (auto& [name, v] : params.params()) targets.emplace(name, &v.mutable_value());
  for (auto& [name, t] : params.buffers()) targets.emplace(name, &t);
  if (count != targets.size()) {
    throw DataError("checkpoint has " + std::to_string(count) + " entries, model expects " +
                    std::to_string(targets.size()));
  }
  std::map<std::string, Tensor> staged;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in);
    if (len > 4096) throw DataError("checkpoint entry name too long");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw DataError("checkpoint truncated");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    auto it = targets.find(name);
    if (it == targets.end()) throw DataError("checkpoint entry '" + name + "' not present in model");
    if (rows != it->second->rows() || cols != it->second->cols()) {
      throw DataError("checkpoint entry '" + name + "' has shape [" + std::to_string(rows) + "x" +
                      std::to_string(cols) + "], model expects " + it->second->shape_string());
    }
    Tensor t(rows, cols);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = get<double>(in);
    staged.emplace(std::move(name), std::move(t));
  }
  if (staged.size() != targets.size()) throw DataError("checkpoint contains duplicate entries");
  for (auto& [name, t] : staged) *targets.at(name) = std::move(t);
}

void load(ParameterSet& params, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  load(params, in);
}

}  // namespace barfiq::checkpoint
