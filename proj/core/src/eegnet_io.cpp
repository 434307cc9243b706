#include <cstring>
#include <fstream>

#include "drowsy/eegnet.hpp"
#include "drowsy/errors.hpp"

#include <fmt/format.h>

namespace drowsy::eegnet {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'W', 'N', 'E', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) {
    throw DataError(fmt::format("model file {} truncated", path.string()));
  }
}

void read_doubles(std::ifstream& in, std::vector<double>& v, std::size_t count,
                  const std::filesystem::path& path) {
  v.resize(count);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) {
    throw DataError(fmt::format("model file {} truncated", path.string()));
  }
}

}  // namespace

void save_model(const EegNetModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));

  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  const EegNetConfig& c = model.cfg;
  for (std::int32_t v :
       {c.in_channels, c.in_time, c.conv1_filters, c.conv2_filters, c.conv2_kh,
        c.conv2_kw, c.conv3_filters, c.conv3_kh, c.conv3_kw, c.pool_h,
        c.pool_w}) {
    write_pod(out, v);
  }
  write_pod(out, c.dropout_p);
  write_pod(out, model.seed);

  write_pod(out, static_cast<std::uint64_t>(model.params.size()));
  out.write(reinterpret_cast<const char*>(model.params.data()),
            static_cast<std::streamsize>(model.params.size() * sizeof(double)));
  write_pod(out, static_cast<std::uint64_t>(model.running_mean.size()));
  out.write(reinterpret_cast<const char*>(model.running_mean.data()),
            static_cast<std::streamsize>(model.running_mean.size() *
                                         sizeof(double)));
  out.write(reinterpret_cast<const char*>(model.running_var.data()),
            static_cast<std::streamsize>(model.running_var.size() *
                                         sizeof(double)));
  if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

EegNetModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(fmt::format("{} is not a model file", path.string()));
  }
  std::uint32_t version = 0;
  read_pod(in, version, path);
  if (version != kVersion) {
    throw DataError(fmt::format("model file {}: unsupported version {}",
                                path.string(), version));
  }

  EegNetModel model;
  EegNetConfig& c = model.cfg;
  for (std::int32_t* v :
       {&c.in_channels, &c.in_time, &c.conv1_filters, &c.conv2_filters,
        &c.conv2_kh, &c.conv2_kw, &c.conv3_filters, &c.conv3_kh, &c.conv3_kw,
        &c.pool_h, &c.pool_w}) {
    std::int32_t tmp = 0;
    read_pod(in, tmp, path);
    *v = tmp;
  }
  read_pod(in, c.dropout_p, path);
  read_pod(in, model.seed, path);

  const ParamLayout L = layout_of(c);
  std::uint64_t n_params = 0;
  read_pod(in, n_params, path);
  if (n_params != L.total) {
    throw DataError(fmt::format(
        "model file {}: parameter count {} does not match config ({})",
        path.string(), n_params, L.total));
  }
  read_doubles(in, model.params, n_params, path);

  std::uint64_t n_maps = 0;
  read_pod(in, n_maps, path);
  const std::uint64_t expected_maps = static_cast<std::uint64_t>(
      c.conv1_filters + c.conv2_filters + c.conv3_filters);
  if (n_maps != expected_maps) {
    throw DataError(fmt::format(
        "model file {}: running-stat count {} does not match config",
        path.string(), n_maps));
  }
  read_doubles(in, model.running_mean, n_maps, path);
  read_doubles(in, model.running_var, n_maps, path);

  for (double v : model.params) {
    if (!std::isfinite(v)) {
      throw DataError(fmt::format("model file {}: non-finite parameter",
                                  path.string()));
    }
  }
  return model;
}

}  // namespace drowsy::eegnet
