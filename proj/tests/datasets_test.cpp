#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "detkit/datasets.hpp"
#include "detkit/error.hpp"
#include "detkit/random.hpp"
#include "support.hpp"

namespace detkit {
namespace {

std::string voc_xml(int w, int h, const std::string& objects) {
  return "<annotation><filename>img.jpg</filename><size><width>" + std::to_string(w) +
         "</width><height>" + std::to_string(h) + "</height><depth>3</depth></size>" + objects +
         "</annotation>";
}

std::string voc_object(const std::string& name, int x0, int y0, int x1, int y1, int difficult = 0) {
  return "<object><name>" + name + "</name><difficult>" + std::to_string(difficult) +
         "</difficult><bndbox><xmin>" + std::to_string(x0) + "</xmin><ymin>" + std::to_string(y0) +
         "</ymin><xmax>" + std::to_string(x1) + "</xmax><ymax>" + std::to_string(y1) +
         "</ymax></bndbox></object>";
}

std::vector<Sample> numbered(std::size_t n, bool detection) {
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].image_id = std::to_string(i);
    out[i].width = out[i].height = 10;
    if (detection) {
      out[i].labels = DetectionLabels{};
    } else {
      out[i].labels = ClassLabel{"c", std::nullopt};
    }
  }
  return out;
}

TEST(Voc, FullImageBox) {
  const Sample s = parse_voc(voc_xml(500, 375, voc_object("dog", 1, 1, 500, 375)));
  ASSERT_EQ(s.detection().boxes.size(), 1u);
  EXPECT_EQ(s.detection().boxes[0].box, (Box{0.5, 0.5, 1, 1}));
  EXPECT_EQ(s.image_id, "img");
}

TEST(Voc, NoObjects) {
  EXPECT_TRUE(parse_voc(voc_xml(10, 10, "")).detection().boxes.empty());
}

TEST(Voc, GoldenFixture) {
  const Sample s = parse_voc(test::slurp(test::data_path("voc_000005.xml")));
  EXPECT_EQ(to_json_line(s) + "\n", test::slurp(test::data_path("voc_000005.golden.jsonl")));
  EXPECT_TRUE(s.detection().boxes[1].difficult);
}

TEST(Voc, Errors) {
  EXPECT_THROW(parse_voc("<annotation><size>"), DataError);
  EXPECT_THROW(parse_voc(voc_xml(10, 10, voc_object("a", 5, 1, 5, 4))), DataError);
  EXPECT_THROW(parse_voc(voc_xml(10, 10, voc_object("a", 1, 1, 11, 4))), DataError);
  EXPECT_THROW(parse_voc(voc_xml(0, 10, "")), DataError);
  try {
    parse_voc(voc_xml(10, 10, voc_object("a", 1, 1, 3, 3) + voc_object("b", 4, 4, 2, 6)), "x.xml");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("object 1"), std::string::npos) << e.what();
  }
}

TEST(Coco, GoldenFixture) {
  const auto samples = parse_coco(test::slurp(test::data_path("coco_minimal.json")));
  EXPECT_EQ(to_jsonl(samples), test::slurp(test::data_path("coco_minimal.golden.jsonl")));
}

TEST(Coco, FullImageAndEmpty) {
  const std::string doc = R"({"images":[{"id":1,"width":40,"height":20},{"id":2,"width":5,"height":5}],
    "annotations":[{"image_id":1,"category_id":3,"bbox":[0,0,40,20]}],
    "categories":[{"id":3,"name":"cat"}]})";
  const auto s = parse_coco(doc);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].image_id, "1");
  EXPECT_EQ(s[0].detection().boxes[0].box, (Box{0.5, 0.5, 1, 1}));
  EXPECT_TRUE(s[1].detection().boxes.empty());
}

TEST(Coco, Errors) {
  const std::string unknown_image = R"({"images":[{"id":1,"width":4,"height":4}],
    "annotations":[{"image_id":9,"category_id":3,"bbox":[0,0,1,1]}],"categories":[{"id":3,"name":"c"}]})";
  EXPECT_THROW(parse_coco(unknown_image), DataError);
  const std::string unknown_cat = R"({"images":[{"id":1,"width":4,"height":4}],
    "annotations":[{"image_id":1,"category_id":4,"bbox":[0,0,1,1]}],"categories":[{"id":3,"name":"c"}]})";
  EXPECT_THROW(parse_coco(unknown_cat), DataError);
  const std::string outside = R"({"images":[{"id":1,"width":4,"height":4}],
    "annotations":[{"image_id":1,"category_id":3,"bbox":[2,0,3,1]}],"categories":[{"id":3,"name":"c"}]})";
  EXPECT_THROW(parse_coco(outside), DataError);
  EXPECT_THROW(parse_coco("{"), DataError);
  EXPECT_THROW(parse_coco(R"({"images":[]})"), DataError);
}

TEST(Jsonl, RoundTripsRandomSamples) {
  Rng rng(12);
  std::vector<Sample> samples;
  for (int i = 0; i < 60; ++i) {
    Sample s;
    s.image_id = "im" + std::to_string(i);
    s.width = 1 + static_cast<int>(rng.below(1000));
    s.height = 1 + static_cast<int>(rng.below(1000));
    if (rng.below(3) == 0) {
      s.labels = ClassLabel{"label " + std::to_string(i), rng.below(2) ? std::optional<std::string>("n01234567") : std::nullopt};
    } else {
      DetectionLabels d;
      for (std::uint64_t k = rng.below(4); k > 0; --k) {
        const double w = rng.uniform(), h = rng.uniform();
        LabeledBox b{{w / 2 + (1 - w) * rng.uniform(), h / 2 + (1 - h) * rng.uniform(), w, h},
                     "c" + std::to_string(rng.below(5)), rng.below(2) == 1, std::nullopt};
        if (rng.below(2)) b.synset = "n07654321";
        b.box.cx = std::min(b.box.cx, 1 - w / 2);
        b.box.cy = std::min(b.box.cy, 1 - h / 2);
        d.boxes.push_back(b);
      }
      s.labels = d;
    }
    samples.push_back(s);
  }
  const std::string text = to_jsonl(samples);
  EXPECT_EQ(parse_jsonl(text), samples);
  EXPECT_EQ(to_jsonl(parse_jsonl(text)), text);
}

TEST(Jsonl, Errors) {
  EXPECT_THROW(sample_from_json_line("{}"), DataError);
  EXPECT_THROW(sample_from_json_line(R"({"image_id":"a","width":2,"height":2,"kind":"other"})"), DataError);
  EXPECT_THROW(sample_from_json_line(
                   R"({"image_id":"a","width":2,"height":2,"kind":"detection","objects":[{"box":[0.9,0.5,0.4,0.1],"class":"x","difficult":false}]})"),
               DataError);
  try {
    parse_jsonl("\n{\"kind\":1}\n", "gt.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.where(), "gt.jsonl:2");
  }
}

TEST(ClassificationList, Parses) {
  const auto s = parse_classification_list(test::slurp(test::data_path("toy_imagenet.txt")));
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[1].classification().class_, "n02094433");
  EXPECT_EQ(s[1].width, 640);
  EXPECT_THROW(parse_classification_list("a n01 3\n"), DataError);
}

TEST(BoxDimensions, SkipsDifficultByDefault) {
  const auto samples = parse_jsonl(test::slurp(test::data_path("voc_000005.golden.jsonl")));
  EXPECT_EQ(box_dimensions(samples).size(), 2u);
  EXPECT_EQ(box_dimensions(samples, true).size(), 3u);
  EXPECT_EQ(box_dimensions(samples)[0], (AnchorPrior{0.124, 0.344}));
}

TEST(MixStream, FourToOneComposition) {
  const auto det = numbered(100, true), cls = numbered(10000, false);
  const MixConfig cfg{4.0, 7, 12500};
  EXPECT_EQ(detection_draws(cfg), 2500u);
  const auto draws = mix_stream(det, cls, cfg);
  ASSERT_EQ(draws.size(), 12500u);
  std::size_t n_det = 0;
  std::set<std::size_t> cls_seen;
  for (const auto& d : draws) {
    if (d.source == SampleSource::kDetection) {
      ++n_det;
      EXPECT_LT(d.index, 100u);
    } else {
      cls_seen.insert(d.index);
    }
  }
  EXPECT_EQ(n_det, 2500u);
  // 10000 classification draws over 10000 images: one full pass.
  EXPECT_EQ(cls_seen.size(), 10000u);
}

TEST(MixStream, EqualRatio) {
  const auto det = numbered(50, true), cls = numbered(50, false);
  for (std::size_t epoch : {99u, 100u, 101u}) {
    const auto draws = mix_stream(det, cls, {1.0, 3, epoch});
    const auto n_det = static_cast<long>(std::count_if(draws.begin(), draws.end(), [](const Draw& d) {
      return d.source == SampleSource::kDetection;
    }));
    EXPECT_LE(std::abs(2 * n_det - static_cast<long>(epoch)), 1);
  }
}

TEST(MixStream, DeterministicAndSeedSensitive) {
  const auto det = numbered(20, true), cls = numbered(30, false);
  const auto a = mix_stream(det, cls, {4.0, 1, 200});
  EXPECT_EQ(a, mix_stream(det, cls, {4.0, 1, 200}));
  EXPECT_NE(a, mix_stream(det, cls, {4.0, 2, 200}));
}

TEST(MixStream, Errors) {
  const auto det = numbered(2, true);
  EXPECT_THROW(mix_stream(det, {}, {4.0, 0, 10}), InvalidArgument);
  EXPECT_THROW(mix_stream(det, det, {0.0, 0, 10}), InvalidArgument);
}

TEST(Schedule, WindowsAndMembership) {
  ScaleSchedule s;
  s.seed = 0;
  const auto allowed = s.sizes();
  ASSERT_EQ(allowed.size(), 10u);
  EXPECT_EQ(allowed.front(), 320);
  EXPECT_EQ(allowed.back(), 608);
  for (uint64_t b = 0; b < 3000; ++b) {
    const int v = next_size(s, b);
    EXPECT_EQ(v % 32, 0);
    EXPECT_GE(v, 320);
    EXPECT_LE(v, 608);
    EXPECT_EQ(v, next_size(s, b - b % 10));
  }
}

TEST(Schedule, UniformWithinThreeSigma) {
  ScaleSchedule s;
  s.seed = 1234;
  std::map<int, int> counts;
  const int windows = 10000;
  for (int w = 0; w < windows; ++w) ++counts[next_size(s, static_cast<uint64_t>(w) * 10)];
  ASSERT_EQ(counts.size(), 10u);
  const double mean = windows / 10.0, sigma = std::sqrt(windows * 0.1 * 0.9);
  for (const auto& [size, n] : counts) EXPECT_LE(std::abs(n - mean), 3 * sigma) << size;
}

TEST(Schedule, Validation) {
  ScaleSchedule s;
  s.max_size = 600;
  EXPECT_THROW(validate(s), InvalidArgument);
  s = {};
  s.period_batches = 0;
  EXPECT_THROW(validate(s), InvalidArgument);
}

TEST(SampleValidate, RejectsBoxOutsideUnitSquare) {
  Sample s;
  s.width = s.height = 10;
  s.labels = DetectionLabels{{LabeledBox{{0.95, 0.5, 0.2, 0.2}, "a", false, std::nullopt}}};
  EXPECT_THROW(validate(s), DataError);
}

}  // namespace
}  // namespace detkit
