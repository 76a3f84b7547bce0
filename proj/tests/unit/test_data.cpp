#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "i2i/core/errors.hpp"
#include "i2i/data/dataset_io.hpp"
#include "i2i/data/nifti.hpp"
#include "i2i/data/phantom.hpp"
#include "i2i/data/pipeline.hpp"

namespace fs = std::filesystem;
using namespace i2i;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("i2i_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Serializes a NIfTI-1 header by hand so the reader is checked against bytes
// it did not produce itself.
template <typename T>
void put(std::vector<char>& buf, std::size_t offset, T value, bool big_endian) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if (big_endian) std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(buf.data() + offset, bytes, sizeof(T));
}

template <typename T>
void write_raw_nifti(const fs::path& path, std::array<std::int16_t, 8> dim, std::int16_t datatype,
                     const std::vector<T>& voxels, bool big_endian, float slope = 1.0f, float inter = 0.0f,
                     const char* magic = "n+1") {
  std::vector<char> buf(352, 0);
  put<std::int32_t>(buf, 0, 348, big_endian);
  for (std::size_t i = 0; i < 8; ++i) put<std::int16_t>(buf, 40 + 2 * i, dim[i], big_endian);
  put<std::int16_t>(buf, 70, datatype, big_endian);
  put<std::int16_t>(buf, 72, static_cast<std::int16_t>(8 * sizeof(T)), big_endian);
  put<float>(buf, 80, 0.94f, big_endian);
  put<float>(buf, 84, 0.94f, big_endian);
  put<float>(buf, 88, 1.2f, big_endian);
  put<float>(buf, 108, 352.0f, big_endian);
  put<float>(buf, 112, slope, big_endian);
  put<float>(buf, 116, inter, big_endian);
  std::memcpy(buf.data() + 344, magic, 4);
  for (T v : voxels) {
    const std::size_t at = buf.size();
    buf.resize(at + sizeof(T));
    put<T>(buf, at, v, big_endian);
  }
  std::ofstream(path, std::ios::binary).write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

Volume ramp_volume(std::array<std::size_t, 3> dims, const std::string& id = "s", Modality m = Modality::T1) {
  Volume v;
  v.subject_id = id;
  v.modality = m;
  v.dims = dims;
  v.voxels.resize(dims[0] * dims[1] * dims[2]);
  for (std::size_t i = 0; i < v.voxels.size(); ++i) v.voxels[i] = static_cast<double>(i);
  return v;
}

// A volume whose slice z has exactly counts[z] foreground pixels in the first row(s).
Volume foreground_volume(std::size_t side, const std::vector<std::size_t>& counts) {
  Volume v;
  v.subject_id = "fg";
  v.dims = {side, side, counts.size()};
  v.voxels.assign(side * side * counts.size(), 0.0);
  for (std::size_t z = 0; z < counts.size(); ++z) {
    for (std::size_t i = 0; i < counts[z]; ++i) v.at(i % side, i / side, z) = 0.5;
  }
  return v;
}

}  // namespace

TEST(Nifti, ReadsBigEndianInt16WithScaling) {
  const auto dir = scratch("be");
  const std::vector<std::int16_t> vox = {0, 1, -2, 300, 7, 8, 9, 10, 11, 12, 13, 14};
  write_raw_nifti<std::int16_t>(dir / "a.nii", {3, 2, 3, 2, 1, 1, 1, 1}, 4, vox, true, 2.0f, 1.0f);
  const auto v = read_nifti(dir / "a.nii", "s", Modality::T2);
  EXPECT_EQ(v.dims, (std::array<std::size_t, 3>{2, 3, 2}));
  for (std::size_t i = 0; i < vox.size(); ++i) EXPECT_DOUBLE_EQ(v.voxels[i], 2.0 * vox[i] + 1.0);
  EXPECT_NEAR(v.spacing[2], 1.2, 1e-6);
  EXPECT_EQ(v.modality, Modality::T2);
}

TEST(Nifti, ReadsLittleEndianTypesAndZeroSlope) {
  const auto dir = scratch("le");
  write_raw_nifti<std::uint8_t>(dir / "u8.nii", {3, 2, 2, 1, 1, 1, 1, 1}, 2, {0, 5, 200, 255}, false, 0.0f);
  EXPECT_EQ(read_nifti(dir / "u8.nii", "s", Modality::T1).voxels, (std::vector<double>{0, 5, 200, 255}));
  write_raw_nifti<double>(dir / "f64.nii", {3, 2, 1, 1, 1, 1, 1, 1}, 64, {-1.5, 1e-300}, true);
  EXPECT_EQ(read_nifti(dir / "f64.nii", "s", Modality::T1).voxels, (std::vector<double>{-1.5, 1e-300}));
  write_raw_nifti<std::uint16_t>(dir / "u16.nii", {3, 1, 1, 2, 1, 1, 1, 1}, 512, {65535, 1}, false);
  EXPECT_EQ(read_nifti(dir / "u16.nii", "s", Modality::T1).voxels, (std::vector<double>{65535, 1}));
}

TEST(Nifti, RejectsUnsupportedFiles) {
  const auto dir = scratch("bad");
  write_raw_nifti<float>(dir / "4d.nii", {4, 1, 1, 1, 2, 1, 1, 1}, 16, {1, 2}, false);
  EXPECT_THROW(read_nifti(dir / "4d.nii", "s", Modality::T1), IoError);
  write_raw_nifti<float>(dir / "pair.nii", {3, 1, 1, 1, 1, 1, 1, 1}, 16, {1}, false, 1, 0, "ni1");
  EXPECT_THROW(read_nifti(dir / "pair.nii", "s", Modality::T1), IoError);
  write_raw_nifti<float>(dir / "dtype.nii", {3, 1, 1, 1, 1, 1, 1, 1}, 1, {1}, false);
  EXPECT_THROW(read_nifti(dir / "dtype.nii", "s", Modality::T1), IoError);
  std::ofstream(dir / "short.nii") << "tiny";
  EXPECT_THROW(read_nifti(dir / "short.nii", "s", Modality::T1), IoError);
  EXPECT_THROW(read_nifti(dir / "missing.nii", "s", Modality::T1), IoError);
  write_raw_nifti<float>(dir / "trunc.nii", {3, 4, 4, 4, 1, 1, 1, 1}, 16, {1, 2, 3}, false);
  EXPECT_THROW(read_nifti(dir / "trunc.nii", "s", Modality::T1), IoError);
}

TEST(Nifti, WriteReadRoundTripPlainAndGzip) {
  const auto dir = scratch("rt");
  auto v = ramp_volume({5, 4, 3});
  v.spacing = {0.94, 0.94, 1.2};
  for (auto& x : v.voxels) x = x * 0.25 - 3.0;
  for (const char* name : {"v.nii", "v.nii.gz"}) {
    write_nifti(dir / name, v);
    const auto back = read_nifti(dir / name, "s", Modality::T1);
    EXPECT_EQ(back.dims, v.dims);
    EXPECT_EQ(back.voxels, v.voxels);
    EXPECT_NEAR(back.spacing[0], 0.94, 1e-6);
  }
  std::ifstream gz(dir / "v.nii.gz", std::ios::binary);
  unsigned char magic[2];
  gz.read(reinterpret_cast<char*>(magic), 2);
  EXPECT_EQ(magic[0], 0x1f);
  EXPECT_EQ(magic[1], 0x8b);
}

TEST(Volume, ValidationAndModalityNames) {
  Volume v = ramp_volume({2, 2, 2});
  EXPECT_NO_THROW(validate_volume(v));
  v.voxels.pop_back();
  EXPECT_THROW(validate_volume(v), DataError);
  v = ramp_volume({2, 2, 2});
  v.spacing[1] = 0.0;
  EXPECT_THROW(validate_volume(v), DataError);
  EXPECT_EQ(parse_modality("pd"), Modality::PD);
  EXPECT_EQ(to_string(Modality::T2), "T2");
  EXPECT_THROW(parse_modality("flair"), ConfigError);
}

TEST(Normalize, ClipsAtPercentileAndScales) {
  const auto v = ramp_volume({10, 10, 10});
  const auto n = normalize_volume(v, 99.5);
  const double hi = 0.995 * 999.0;
  EXPECT_EQ(n.voxels[0], 0.0);
  EXPECT_NEAR(n.voxels[500], 500.0 / hi, 1e-12);
  EXPECT_EQ(n.voxels[999], 1.0);
  EXPECT_EQ(*std::max_element(n.voxels.begin(), n.voxels.end()), 1.0);
}

TEST(Normalize, FallsBackToMaxAndRejectsConstant) {
  Volume sparse = ramp_volume({10, 10, 1});
  std::fill(sparse.voxels.begin(), sparse.voxels.end(), 0.0);
  sparse.voxels[7] = 4.0;
  const auto n = normalize_volume(sparse, 99.5);
  EXPECT_EQ(n.voxels[7], 1.0);
  Volume flat = ramp_volume({3, 3, 3});
  std::fill(flat.voxels.begin(), flat.voxels.end(), 2.0);
  EXPECT_THROW(normalize_volume(flat), DataError);
}

TEST(Slices, ForegroundSelectionIsStrict) {
  // 20 x 20 slices: 10%, 4%, exactly 5%, empty, 50%.
  const auto v = foreground_volume(20, {40, 16, 20, 0, 200});
  EXPECT_DOUBLE_EQ(foreground_fraction(v, 0), 0.1);
  const auto slices = extract_slices(v, 0.05);
  ASSERT_EQ(slices.size(), 2u);
  EXPECT_EQ(slices[0].slice_index, 0u);
  EXPECT_EQ(slices[1].slice_index, 4u);
  EXPECT_EQ(slices[0].image.height(), 20u);
}

TEST(Slices, AxialOrientationAndSquareFit) {
  const auto v = ramp_volume({4, 3, 2});
  const auto img = axial_slice(v, 1);
  EXPECT_EQ(img.height(), 3u);
  EXPECT_EQ(img.width(), 4u);
  EXPECT_EQ(img.at(2, 1), v.at(1, 2, 1));

  ImageTensor rect(2, 6, 1);
  for (std::size_t x = 0; x < 6; ++x) rect.at(0, x) = static_cast<double>(x + 1);
  const auto sq = fit_to_square(rect, 4);
  EXPECT_EQ(sq.height(), 4u);
  // Width 6 -> 4 crops one column each side; height 2 -> 4 pads one row each side.
  EXPECT_EQ(sq.at(0, 0), 0.0);
  EXPECT_EQ(sq.at(1, 0), 2.0);
  EXPECT_EQ(sq.at(1, 3), 5.0);
  EXPECT_EQ(sq.at(3, 3), 0.0);
}

TEST(Split, SizesDisjointAndDeterministic) {
  std::vector<std::string> ids;
  for (int i = 0; i < 581; ++i) ids.push_back("IXI" + std::to_string(1000 + i));
  const auto a = split_subjects(ids, 0.8, 0);
  EXPECT_EQ(a.train.size(), 464u);
  EXPECT_EQ(a.test.size(), 117u);
  std::set<std::string> all(a.train.begin(), a.train.end());
  for (const auto& t : a.test) EXPECT_TRUE(all.insert(t).second) << t;
  EXPECT_EQ(all.size(), 581u);

  auto shuffled = ids;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto b = split_subjects(shuffled, 0.8, 0);
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(split_subjects(ids, 0.8, 1).train, a.train);
  EXPECT_TRUE(std::is_sorted(a.train.begin(), a.train.end()));
}

TEST(Split, EdgeCases) {
  EXPECT_THROW(split_subjects({}, 0.8, 0), DataError);
  EXPECT_THROW(split_subjects({"a", "a"}, 0.8, 0), DataError);
  EXPECT_THROW(split_subjects({"a"}, 1.5, 0), DataError);
  EXPECT_EQ(split_subjects({"a", "b", "c", "d", "e"}, 0.8, 0).train.size(), 4u);
  EXPECT_EQ(split_subjects({"a", "b"}, 1.0, 0).test.size(), 0u);
}

TEST(Task, ParseAndLabels) {
  const auto t = parse_task("T1-PD");
  EXPECT_EQ(t.source, Modality::T1);
  EXPECT_EQ(t.target, Modality::PD);
  EXPECT_EQ(t.label(), "T1→PD");
  EXPECT_EQ(t.name(), "t1-pd");
  EXPECT_THROW(parse_task("t2-pd"), ConfigError);
  const auto all = all_tasks();
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[1].label(), "T2→T1");
  EXPECT_EQ(all[3].label(), "PD→T1");
}

TEST(Pairs, MissingModalityIsSkippedWithWarning) {
  const auto cohort = make_phantom_cohort(3, 1);
  std::vector<Volume> t1, t2;
  for (const auto& v : cohort) {
    if (v.modality == Modality::T1) t1.push_back(normalize_volume(v));
    if (v.modality == Modality::T2 && v.subject_id != "phantom-001") t2.push_back(normalize_volume(v));
  }
  const auto r = make_pairs(t1, t2, {"phantom-002", "phantom-000", "phantom-001"}, 64);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("phantom-001"), std::string::npos);
  ASSERT_EQ(r.pairs.size(), 20u);
  EXPECT_EQ(r.pairs.front().subject_id, "phantom-000");
  EXPECT_EQ(r.pairs.back().subject_id, "phantom-002");
  for (std::size_t i = 1; i < 10; ++i) EXPECT_LT(r.pairs[i - 1].slice_index, r.pairs[i].slice_index);
  EXPECT_EQ(r.pairs[0].target_modality, Modality::T2);
}

TEST(Phantom, TissueSlicesAndContrasts) {
  const auto vols = make_phantom_subject("p", 3);
  ASSERT_EQ(vols.size(), 3u);
  for (const auto& v : vols) {
    EXPECT_EQ(v.dims, (std::array<std::size_t, 3>{64, 64, 14}));
    for (std::size_t z : {0u, 1u, 12u, 13u}) EXPECT_EQ(foreground_fraction(v, z), 0.0);
    EXPECT_EQ(extract_slices(normalize_volume(v)).size(), 10u);
  }
  EXPECT_EQ(vols[0].modality, Modality::T1);
  EXPECT_EQ(vols[2].modality, Modality::PD);
  // T1 rises and T2 falls with the latent tissue value.
  EXPECT_LT(phantom_contrast(Modality::T1, 0.1), phantom_contrast(Modality::T1, 0.9));
  EXPECT_GT(phantom_contrast(Modality::T2, 0.1), phantom_contrast(Modality::T2, 0.9));
  EXPECT_EQ(make_phantom_subject("p", 3)[1].voxels, vols[1].voxels);
  EXPECT_NE(make_phantom_subject("p", 4)[1].voxels, vols[1].voxels);
  PhantomOptions bad;
  bad.tissue_slices = 20;
  EXPECT_THROW(make_phantom_subject("p", 3, bad), ConfigError);
}

TEST(Dataset, PhantomCohortSplitsIntoTwoHundredAndFifty) {
  PipelineOptions o;
  o.image_size = 64;
  const auto ds = build_dataset(make_phantom_cohort(25, 7), parse_task("t1-t2"), o);
  EXPECT_EQ(ds.train_subjects.size(), 20u);
  EXPECT_EQ(ds.test_subjects.size(), 5u);
  EXPECT_EQ(ds.train.size(), 200u);
  EXPECT_EQ(ds.test.size(), 50u);
  EXPECT_TRUE(ds.warnings.empty());
  EXPECT_NO_THROW(check_split(ds));
  for (const auto& p : ds.test) {
    EXPECT_TRUE(p.source.is_normalized());
    EXPECT_EQ(p.target.height(), 64u);
  }
  auto leaked = ds;
  leaked.test_subjects.push_back(ds.train_subjects[0]);
  EXPECT_THROW(check_split(leaked), SplitViolation);
}

TEST(Dataset, FitsSlicesToRequestedSize) {
  PipelineOptions o;
  o.image_size = 96;
  PhantomOptions p;
  p.size = 48;
  const auto ds = build_dataset(make_phantom_cohort(2, 1, p), parse_task("pd-t1"), o);
  ASSERT_FALSE(ds.train.empty());
  EXPECT_EQ(ds.train[0].source.height(), 96u);
  EXPECT_EQ(ds.task.source, Modality::PD);
}

TEST(DatasetIo, ArchiveRoundTripAndHash) {
  const auto dir = scratch("ds");
  PipelineOptions o;
  o.image_size = 64;
  const auto ds = build_dataset(make_phantom_cohort(3, 2), parse_task("t2-t1"), o);
  save_dataset(dir / "ds.i2i", ds);
  const auto back = load_dataset(dir / "ds.i2i");
  EXPECT_EQ(back.task, ds.task);
  EXPECT_EQ(back.train_subjects, ds.train_subjects);
  ASSERT_EQ(back.train.size(), ds.train.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    EXPECT_EQ(back.train[i].subject_id, ds.train[i].subject_id);
    EXPECT_EQ(back.train[i].slice_index, ds.train[i].slice_index);
    EXPECT_EQ(back.train[i].source, ds.train[i].source);
  }
  EXPECT_EQ(dataset_hash(back), dataset_hash(ds));
  EXPECT_EQ(dataset_hash(ds).size(), 16u);
  auto changed = ds;
  changed.train[0].source.at(10, 10) += 1e-9;
  EXPECT_NE(dataset_hash(changed), dataset_hash(ds));
}

TEST(DatasetIo, ManifestRows) {
  const auto dir = scratch("manifest");
  PipelineOptions o;
  o.image_size = 64;
  const auto ds = build_dataset(make_phantom_cohort(2, 2), parse_task("t1-t2"), o);
  write_dataset_manifest(dir / "m.csv", ds);
  std::ifstream is(dir / "m.csv");
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "subject,modality,slice,split");
  std::size_t rows = 0;
  while (std::getline(is, line)) rows += line.empty() ? 0 : 1;
  EXPECT_EQ(rows, 2 * (ds.train.size() + ds.test.size()));
}

TEST(DatasetIo, VolumeDirectoryRoundTrip) {
  const auto dir = scratch("voldir");
  const auto cohort = make_phantom_cohort(2, 5);
  write_volume_directory(dir, cohort);
  EXPECT_TRUE(fs::exists(dir / "phantom-000" / "T1.nii.gz"));
  fs::remove(dir / "phantom-001" / "PD.nii.gz");
  const auto back = load_volume_directory(dir);
  ASSERT_EQ(back.size(), 5u);
  for (const auto& v : back) {
    const auto it = std::find_if(cohort.begin(), cohort.end(), [&](const Volume& c) {
      return c.subject_id == v.subject_id && c.modality == v.modality;
    });
    ASSERT_NE(it, cohort.end());
    for (std::size_t i = 0; i < v.voxels.size(); ++i) {
      ASSERT_EQ(v.voxels[i], static_cast<double>(static_cast<float>(it->voxels[i])));
    }
  }
  EXPECT_THROW(load_volume_directory(dir / "nope"), IoError);
}
