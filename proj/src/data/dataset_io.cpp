#include "i2i/data/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "i2i/core/archive.hpp"
#include "i2i/core/errors.hpp"
#include "i2i/core/hash.hpp"
#include "i2i/data/nifti.hpp"

namespace fs = std::filesystem;

namespace i2i {
namespace {

std::string pair_key(const char* split, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s/%06zu", split, i);
  return buf;
}

nlohmann::json describe(const std::vector<PairedSlice>& pairs) {
  auto arr = nlohmann::json::array();
  for (const auto& p : pairs) arr.push_back({{"subject", p.subject_id}, {"slice", p.slice_index}});
  return arr;
}

void store_pairs(Archive& ar, const char* split, const std::vector<PairedSlice>& pairs) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto key = pair_key(split, i);
    ar.arrays.add(key + "/source", pairs[i].source.tensor(), false);
    ar.arrays.add(key + "/target", pairs[i].target.tensor(), false);
  }
}

std::vector<PairedSlice> load_pairs(const Archive& ar, const char* split, const nlohmann::json& meta, const Task& task) {
  std::vector<PairedSlice> out;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const auto key = pair_key(split, i);
    if (!ar.arrays.contains(key + "/source") || !ar.arrays.contains(key + "/target")) {
      throw IoError("dataset archive is missing images for " + key);
    }
    out.push_back({meta[i].at("subject").get<std::string>(), meta[i].at("slice").get<std::size_t>(),
                   ImageTensor(ar.arrays.at(key + "/source").value), ImageTensor(ar.arrays.at(key + "/target").value),
                   task.source, task.target});
  }
  return out;
}

void hash_pairs(Fnv1a& h, const std::vector<PairedSlice>& pairs) {
  for (const auto& p : pairs) {
    h.update(p.subject_id);
    h.update(&p.slice_index, sizeof p.slice_index);
    for (const auto* img : {&p.source, &p.target}) {
      const auto v = img->tensor().values();
      h.update(v.data(), v.size() * sizeof(double));
    }
  }
}

}  // namespace

std::vector<Volume> load_volume_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("data directory " + dir.string() + " does not exist");
  std::vector<fs::path> subjects;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) subjects.push_back(e.path());
  }
  std::sort(subjects.begin(), subjects.end());
  std::vector<Volume> out;
  for (const auto& s : subjects) {
    for (auto m : {Modality::T1, Modality::T2, Modality::PD}) {
      for (const char* ext : {".nii.gz", ".nii"}) {
        const fs::path file = s / (to_string(m) + ext);
        if (fs::exists(file)) {
          out.push_back(read_nifti(file, s.filename().string(), m));
          break;
        }
      }
    }
  }
  return out;
}

void write_volume_directory(const fs::path& dir, const std::vector<Volume>& volumes) {
  for (const auto& v : volumes) {
    const fs::path sub = dir / v.subject_id;
    fs::create_directories(sub);
    write_nifti(sub / (to_string(v.modality) + ".nii.gz"), v);
  }
}

void save_dataset(const fs::path& path, const PairedDataset& ds) {
  Archive ar;
  ar.metadata = {{"kind", "paired_dataset"},
                 {"task", ds.task.name()},
                 {"image_size", ds.image_size},
                 {"train_subjects", ds.train_subjects},
                 {"test_subjects", ds.test_subjects},
                 {"train", describe(ds.train)},
                 {"test", describe(ds.test)},
                 {"warnings", ds.warnings},
                 {"hash", dataset_hash(ds)}};
  store_pairs(ar, "train", ds.train);
  store_pairs(ar, "test", ds.test);
  write_archive(path, ar);
}

PairedDataset load_dataset(const fs::path& path) {
  const Archive ar = read_archive(path);
  const auto& m = ar.metadata;
  if (m.value("kind", "") != "paired_dataset") throw IoError(path.string() + " is not a prepared dataset archive");
  try {
    PairedDataset ds;
    ds.task = parse_task(m.at("task").get<std::string>());
    ds.image_size = m.at("image_size").get<std::size_t>();
    ds.train_subjects = m.at("train_subjects").get<std::vector<std::string>>();
    ds.test_subjects = m.at("test_subjects").get<std::vector<std::string>>();
    ds.warnings = m.value("warnings", std::vector<std::string>{});
    ds.train = load_pairs(ar, "train", m.at("train"), ds.task);
    ds.test = load_pairs(ar, "test", m.at("test"), ds.task);
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed dataset metadata: " + e.what());
  }
}

void write_dataset_manifest(const fs::path& path, const PairedDataset& ds) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "subject,modality,slice,split\n";
  const auto emit = [&](const std::vector<PairedSlice>& pairs, const char* split) {
    for (const auto& p : pairs) {
      os << p.subject_id << ',' << to_string(p.source_modality) << ',' << p.slice_index << ',' << split << '\n';
      os << p.subject_id << ',' << to_string(p.target_modality) << ',' << p.slice_index << ',' << split << '\n';
    }
  };
  emit(ds.train, "train");
  emit(ds.test, "test");
}

std::string dataset_hash(const PairedDataset& ds) {
  Fnv1a h;
  h.update(ds.task.name());
  h.update(&ds.image_size, sizeof ds.image_size);
  for (const auto& s : ds.train_subjects) h.update("train:" + s);
  for (const auto& s : ds.test_subjects) h.update("test:" + s);
  hash_pairs(h, ds.train);
  hash_pairs(h, ds.test);
  return h.hex();
}

}  // namespace i2i
