#include "drowsy/io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "drowsy/errors.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

static_assert(std::endian::native == std::endian::little,
              "signal blobs are little-endian; big-endian hosts unsupported");

namespace drowsy {

using nlohmann::json;

namespace {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

}  // namespace

void save_recording(const Recording& rec, const std::filesystem::path& dir) {
  rec.validate();
  std::filesystem::create_directories(dir);

  json manifest{{"subject_id", rec.subject_id},
                {"fs_hz", rec.fs_hz},
                {"channel_labels", rec.channel_labels},
                {"n_samples", rec.n_samples()}};
  if (rec.earlobe_indices) {
    manifest["earlobe_indices"] =
        json::array({rec.earlobe_indices->first, rec.earlobe_indices->second});
  } else {
    manifest["earlobe_indices"] = nullptr;
  }
  json evs = json::array();
  for (const auto& ev : rec.events) {
    evs.push_back({{"onset_s", ev.onset_s},
                   {"response_time_s", ev.response_time_s}});
  }
  manifest["events"] = evs;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::ofstream blob(dir / "signal.f64le", std::ios::binary | std::ios::trunc);
  if (!blob) {
    throw DataError(fmt::format("cannot write {}", (dir / "signal.f64le").string()));
  }
  blob.write(reinterpret_cast<const char*>(rec.data.a.data()),
             static_cast<std::streamsize>(rec.data.a.size() * sizeof(double)));
  if (!blob) throw DataError("signal blob write failed");
}

Recording load_recording(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("corrupt manifest in {}: {}", dir.string(),
                                e.what()));
  }

  Recording rec;
  try {
    rec.subject_id = manifest.at("subject_id");
    rec.fs_hz = manifest.at("fs_hz");
    rec.channel_labels =
        manifest.at("channel_labels").get<std::vector<std::string>>();
    const auto& el = manifest.at("earlobe_indices");
    if (!el.is_null()) {
      if (!el.is_array() || el.size() != 2) {
        throw DataError("manifest: earlobe_indices must be null or a pair");
      }
      rec.earlobe_indices = std::make_pair(el[0].get<int>(), el[1].get<int>());
    }
    for (const auto& ev : manifest.at("events")) {
      rec.events.push_back(
          {ev.at("onset_s").get<double>(), ev.at("response_time_s").get<double>()});
    }
    const long n_samples = manifest.at("n_samples");
    const int n_channels = static_cast<int>(rec.channel_labels.size());

    std::ifstream blob(dir / "signal.f64le", std::ios::binary);
    if (!blob) {
      throw DataError(fmt::format("missing signal blob in {}", dir.string()));
    }
    blob.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(blob.tellg());
    const std::size_t expected =
        static_cast<std::size_t>(n_channels) * n_samples * sizeof(double);
    if (bytes != expected) {
      throw DataError(fmt::format(
          "signal blob in {} holds {} bytes, expected {} ({} ch x {} samples)",
          dir.string(), bytes, expected, n_channels, n_samples));
    }
    blob.seekg(0);
    rec.data = Matrix(n_channels, static_cast<int>(n_samples));
    blob.read(reinterpret_cast<char*>(rec.data.a.data()),
              static_cast<std::streamsize>(expected));
    if (!blob) throw DataError("signal blob read failed");
  } catch (const json::exception& e) {
    throw DataError(fmt::format("corrupt manifest in {}: {}", dir.string(),
                                e.what()));
  }

  rec.validate();
  return rec;
}

void save_dataset_index(const std::filesystem::path& dir,
                        const std::vector<std::string>& subjects,
                        const std::string& extra_json) {
  std::filesystem::create_directories(dir);
  json j{{"subjects", subjects}};
  if (!extra_json.empty()) j["profile"] = json::parse(extra_json);
  write_text_file(dir / "dataset.json", j.dump(2) + "\n");
}

std::vector<std::string> load_dataset_index(const std::filesystem::path& dir) {
  json j;
  try {
    j = json::parse(read_text_file(dir / "dataset.json"));
    return j.at("subjects").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(fmt::format("corrupt dataset.json in {}: {}", dir.string(),
                                e.what()));
  }
}

std::string csv_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void save_labels_csv(const LabelVector& labels,
                     const std::filesystem::path& path) {
  std::ostringstream out;
  out << "grid_time_s,label\n";
  for (int i = 0; i < labels.grid.count; ++i) {
    out << csv_num(labels.grid.time_at(i)) << ',' << csv_num(labels.values[i])
        << '\n';
  }
  write_text_file(path, out.str());
}

void save_predictions_csv(const std::filesystem::path& path,
                          const std::string& algorithm,
                          const std::string& subject, int repeat,
                          const SampleGrid& grid,
                          std::span<const double> predictions) {
  std::ostringstream out;
  out << "algorithm,subject,repeat,grid_time_s,prediction\n";
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out << algorithm << ',' << subject << ',' << repeat << ','
        << csv_num(grid.time_at(static_cast<int>(i))) << ','
        << csv_num(predictions[i]) << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace drowsy
