#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "genre/dataset.h"
#include "test_support.h"

using namespace genre;
using namespace genre::testing;

namespace {

Dataset random_dataset(std::size_t n, std::size_t d, std::size_t classes, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  Dataset ds;
  ds.X = Matrix(n, d);
  for (auto& v : ds.X.data()) v = uniform(gen, -scale, scale);
  for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back(genre_names().at(c));
  for (std::size_t i = 0; i < n; ++i) {
    ds.y.push_back(static_cast<int>(i % classes));
    ds.filenames.push_back(genre_names().at(i % classes) + "/clip" + std::to_string(i) + ".wav");
  }
  return ds;
}

}  // namespace

TEST_CASE("scan finds clips sorted by genre and filename") {
  TempDir dir;
  for (const char* g : {"rock", "blues"}) {
    std::filesystem::create_directories(dir / g);
    for (const char* f : {"b.wav", "a.wav", "c.wav"}) write_bytes(dir.path() / g / f, {0});
  }
  write_bytes(dir / "rock/notes.txt", {0});
  write_bytes(dir / "stray.wav", {0});
  const auto clips = scan_gtzan(dir.path());
  REQUIRE(clips.size() == 6);
  CHECK(clips[0].genre == "blues");
  CHECK(clips[0].path.filename() == "a.wav");
  CHECK(clips[2].path.filename() == "c.wav");
  CHECK(clips[3].genre == "rock");
  CHECK(clips[5].path.filename() == "c.wav");
  for (const auto& c : clips) CHECK_FALSE(c.features.has_value());

  TempDir empty;
  CHECK_ERRC(scan_gtzan(empty.path()), Errc::empty_dataset);
  CHECK_ERRC(scan_gtzan(empty / "missing"), Errc::io_error);
}

TEST_CASE("label encoding sorts class names") {
  const auto enc = encode_labels({"rock", "blues", "rock"});
  CHECK(enc.class_names == std::vector<std::string>{"blues", "rock"});
  CHECK(enc.y == std::vector<int>{1, 0, 1});

  std::vector<std::string> many;
  std::mt19937_64 gen(5);
  for (int i = 0; i < 300; ++i) many.push_back(genre_names().at(gen() % 10));
  const auto e = encode_labels(many);
  CHECK(std::is_sorted(e.class_names.begin(), e.class_names.end()));
  for (std::size_t i = 0; i < many.size(); ++i) CHECK(e.class_names.at(static_cast<std::size_t>(e.y[i])) == many[i]);
}

TEST_CASE("split partitions deterministically") {
  const auto ds = random_dataset(10, 3, 2, 1);
  SplitSpec spec;
  const auto idx = split_indices(ds, spec);
  CHECK(idx.train.size() == 8);
  CHECK(idx.test.size() == 2);

  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto big = random_dataset(97, 2, 10 - seed % 8, seed);
    for (bool stratified : {true, false}) {
      SplitSpec s{0.8, seed, stratified};
      const auto a = split_indices(big, s);
      const auto b = split_indices(big, s);
      CHECK(a.train == b.train);
      CHECK(a.test == b.test);
      std::vector<std::size_t> all = a.train;
      all.insert(all.end(), a.test.begin(), a.test.end());
      std::sort(all.begin(), all.end());
      REQUIRE(all.size() == big.size());
      for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
      CHECK(std::is_sorted(a.train.begin(), a.train.end()));

      if (stratified) {
        std::map<int, std::size_t> total;
        std::map<int, std::size_t> in_train;
        for (int y : big.y) ++total[y];
        for (auto i : a.train) ++in_train[big.y[i]];
        for (const auto& [c, n] : total) {
          CHECK(std::abs(static_cast<double>(in_train[c]) - 0.8 * static_cast<double>(n)) <= 0.5 + 1e-12);
        }
      }
    }
  }

  const auto other = split_indices(random_dataset(100, 2, 10, 3), SplitSpec{0.8, 43, true});
  const auto base = split_indices(random_dataset(100, 2, 10, 3), SplitSpec{0.8, 42, true});
  CHECK(other.train != base.train);

  CHECK_ERRC(split_indices(ds, SplitSpec{1.0, 1, true}), Errc::invalid_params);
  CHECK_ERRC(split_indices(ds, SplitSpec{0.0, 1, true}), Errc::invalid_params);

  const auto [train, test] = split(ds, spec);
  CHECK(train.size() + test.size() == ds.size());
  CHECK(train.class_names == ds.class_names);
}

TEST_CASE("feature CSV round trip") {
  TempDir dir;
  auto ds = random_dataset(50, 20, 3, 9);
  ds.X(0, 0) = 1.0 / 3.0;
  ds.X(1, 1) = -1e-12;
  save_features(ds, dir / "f.csv");
  const auto text = read_text(dir / "f.csv");
  CHECK(text.rfind("filename,label,f0,f1,", 0) == 0);
  const auto back = load_features(dir / "f.csv");
  CHECK(back.y == ds.y);
  CHECK(back.class_names == ds.class_names);
  CHECK(back.filenames == ds.filenames);
  REQUIRE(back.X.rows() == ds.X.rows());
  REQUIRE(back.X.cols() == ds.X.cols());
  for (std::size_t i = 0; i < ds.X.data().size(); ++i) {
    const double a = ds.X.data()[i];
    const double b = back.X.data()[i];
    CHECK(std::abs(a - b) <= 1e-8);
    CHECK(std::abs(a - b) <= 5e-9 * std::abs(a));  // nine significant digits
  }

  // Saving the loaded set reproduces the file byte for byte.
  save_features(back, dir / "g.csv");
  CHECK(read_text(dir / "g.csv") == text);
}

TEST_CASE("feature CSV schema errors") {
  TempDir dir;
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir / name) << body;
    return dir / name;
  };
  CHECK_ERRC(load_features(write("a.csv", "filename,label,f0,f1\nx.wav,rock,1\n")), Errc::schema_mismatch);
  CHECK_ERRC(load_features(write("b.csv", "filename,label\nx.wav,rock\n")), Errc::schema_mismatch);
  CHECK_ERRC(load_features(write("c.csv", "filename,genre,f0\nx.wav,rock,1\n")), Errc::schema_mismatch);
  CHECK_ERRC(load_features(write("d.csv", "")), Errc::schema_mismatch);
  CHECK_ERRC(load_features(write("e.csv", "filename,label,f0\n")), Errc::empty_dataset);
  CHECK_ERRC(load_features(write("f.csv", "filename,label,f0\nx.wav,rock,abc\n")), Errc::parse_error);
  CHECK_ERRC(load_features(write("g.csv", "filename,label,f0\nx.wav,,1\n")), Errc::parse_error);
  CHECK_ERRC(load_features(dir / "missing.csv"), Errc::io_error);
}

TEST_CASE("dataset check and subset") {
  auto ds = random_dataset(6, 2, 2, 4);
  CHECK_NOTHROW(ds.check());
  const auto sub = ds.subset({5, 0});
  CHECK(sub.size() == 2);
  CHECK(sub.X(0, 1) == ds.X(5, 1));
  CHECK(sub.filenames[1] == ds.filenames[0]);
  auto bad = ds;
  bad.y.pop_back();
  CHECK_ERRC(bad.check(), Errc::schema_mismatch);
  bad = ds;
  bad.y[0] = 7;
  CHECK_ERRC(bad.check(), Errc::schema_mismatch);
}

TEST_CASE("large feature file loads quickly") {
  TempDir dir;
  const auto ds = random_dataset(1000, 20, 10, 11, 500.0);
  save_features(ds, dir / "big.csv");
  const auto t0 = std::chrono::steady_clock::now();
  const auto back = load_features(dir / "big.csv");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(back.size() == 1000);
  CHECK(secs < 1.0);
}

TEST_CASE("rng draws are portable") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    CHECK(r.below(13) < 13);
    const double u = r.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  // Fisher-Yates on a permutation keeps every element.
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
  Rng s(3);
  s.shuffle(v);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 50);
  // Raw engine output is the standard mt19937_64 sequence.
  std::mt19937_64 ref(42);
  Rng c(42);
  CHECK(c.next() == ref());
}
