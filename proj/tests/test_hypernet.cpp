#include <doctest.h>

#include <sstream>

#include "lhn/binary_io.hpp"
#include "lhn/error.hpp"
#include "lhn/hypernet.hpp"
#include "support.hpp"

using namespace lhn;

namespace {

struct Fixture {
  Dataset ds = testing::small_synthetic();
  NetworkConfig cfg = preset("convnet1", ds.window_length, ds.channels, ds.num_classes());
  NetworkParams params;

  Fixture() {
    TrainHyper h;
    h.epochs = 5;
    h.seed = 3;
    params = train(cfg, ds, h);
  }

  LhnOptions options(std::size_t c = 5) const {
    LhnOptions o;
    o.components = c;
    o.classifier_hyper.epochs = 10;
    return o;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_SUITE("hypernet") {
  TEST_CASE("collect_pool_features shapes") {
    const auto& f = fixture();
    const auto feats = collect_pool_features(f.params, f.cfg, f.ds);
    const auto shapes = f.cfg.propagate();
    REQUIRE(feats.size() == 2);
    const auto pools = f.cfg.pool_layers();
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(feats[i].rows() == f.ds.size());
      CHECK(feats[i].cols() == shapes[pools[i]].size());
    }
    const auto trace = forward_with_taps(f.params, f.cfg, f.ds.windows[5].values);
    for (std::size_t j = 0; j < trace.pool_taps[1].size(); ++j) CHECK(feats[1].at(5, j) == trace.pool_taps[1][j]);
    Dataset empty = f.ds;
    empty.windows.clear();
    CHECK_THROWS_AS(collect_pool_features(f.params, f.cfg, empty), InputError);
  }

  TEST_CASE("latent width and per-layer clamping") {
    const auto& f = fixture();
    const auto model = lhn_fit(f.params, f.cfg, f.ds, f.options(5));
    CHECK(model.pls_models.size() == f.cfg.pool_count());
    CHECK(model.latent_dim() == 10);
    CHECK(model.classifier_config.input_h == model.latent_dim());

    // n - 1 = 47 caps every layer.
    const auto clamped = lhn_fit(f.params, f.cfg, f.ds, f.options(60));
    CHECK(clamped.layer_widths() == std::vector<std::size_t>{47, 47});
    CHECK(clamped.latent_dim() <= 2 * 60);

    const auto c3 = preset("convnet3", 500, 2, 4);
    CHECK(c3.pool_count() * 19 == 76);
  }

  TEST_CASE("freezing contract") {
    const auto& f = fixture();
    const auto before = serialize_network(f.cfg, f.params);
    NetworkParams copy = f.params;
    const auto model = lhn_fit(copy, f.cfg, f.ds, f.options());
    lhn_predict(model, copy, f.cfg, f.ds.windows[0].values);
    export_projection(model, copy, f.cfg, f.ds, ProjectionLayers::all);
    CHECK(serialize_network(f.cfg, copy) == before);
    CHECK(model.network_hash == network_hash(f.cfg, f.params));
  }

  TEST_CASE("fitting is idempotent") {
    const auto& f = fixture();
    const auto a = lhn_fit(f.params, f.cfg, f.ds, f.options());
    const auto b = lhn_fit(f.params, f.cfg, f.ds, f.options());
    CHECK(serialize_lhn(a) == serialize_lhn(b));
  }

  TEST_CASE("per-layer independence") {
    const auto& f = fixture();
    const auto a = lhn_fit(f.params, f.cfg, f.ds, f.options());
    NetworkParams perturbed = f.params;
    for (auto& v : perturbed.conv[1].kernels.data()) v *= 1.5;  // changes only the second tap
    const auto b = lhn_fit(perturbed, f.cfg, f.ds, f.options());
    CHECK(a.pls_models[0] == b.pls_models[0]);
    CHECK_FALSE(a.pls_models[1] == b.pls_models[1]);
  }

  TEST_CASE("transform concatenates layers in order") {
    const auto& f = fixture();
    const auto model = lhn_fit(f.params, f.cfg, f.ds, f.options(4));
    const auto& x = f.ds.windows[3].values;
    const auto latent = lhn_transform(model, f.params, f.cfg, x);
    const auto taps = forward_with_taps(f.params, f.cfg, x).pool_taps;
    REQUIRE(latent.size() == 8);
    for (std::size_t i = 0; i < 2; ++i) {
      std::vector<double> part(4);
      pls_transform_row(model.pls_models[i], taps[i], part);
      for (std::size_t a = 0; a < 4; ++a) CHECK(latent[i * 4 + a] == part[a]);
    }
    const auto all = lhn_transform_dataset(model, f.params, f.cfg, f.ds);
    for (std::size_t a = 0; a < 8; ++a) CHECK(all.at(3, a) == latent[a]);

    std::vector<std::vector<double>> short_taps{taps[0]};
    CHECK_THROWS_AS(lhn_transform_taps(model, short_taps), ShapeError);
  }

  TEST_CASE("prediction is deterministic and shift invariant") {
    const auto& f = fixture();
    const auto model = lhn_fit(f.params, f.cfg, f.ds, f.options());
    const auto& x = f.ds.windows[11].values;
    const auto first = lhn_predict(model, f.params, f.cfg, x);
    for (int i = 0; i < 3; ++i) CHECK(lhn_predict(model, f.params, f.cfg, x) == first);
    auto logits = lhn_logits(model, f.params, f.cfg, x);
    CHECK(argmax(logits) == first);
    for (auto& v : logits) v -= 42.0;
    CHECK(argmax(logits) == first);
  }

  TEST_CASE("ablation without reduction feeds raw taps") {
    const auto& f = fixture();
    LhnOptions o = f.options();
    o.reduce = false;
    const auto model = lhn_fit(f.params, f.cfg, f.ds, o);
    CHECK(model.pls_models.empty());
    CHECK(model.latent_dim() == model.tap_dims[0] + model.tap_dims[1]);
    const auto taps = forward_with_taps(f.params, f.cfg, f.ds.windows[0].values).pool_taps;
    const auto latent = lhn_transform(model, f.params, f.cfg, f.ds.windows[0].values);
    CHECK(latent[model.tap_dims[0]] == taps[1][0]);
    CHECK_THROWS_AS(export_projection(model, f.params, f.cfg, f.ds, ProjectionLayers::last), ParameterError);
  }

  TEST_CASE("single-class training data is rejected") {
    const auto& f = fixture();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < f.ds.size(); ++i)
      if (f.ds.windows[i].label == 0) idx.push_back(i);
    CHECK_THROWS_AS(lhn_fit(f.params, f.cfg, f.ds.subset(idx), f.options()), DegenerateClassError);
  }

  TEST_CASE("projection export") {
    const auto& f = fixture();
    const auto model = lhn_fit(f.params, f.cfg, f.ds, f.options());
    const auto last = export_projection(model, f.params, f.cfg, f.ds, ProjectionLayers::last);
    const auto all = export_projection(model, f.params, f.cfg, f.ds, ProjectionLayers::all);
    CHECK(last.size() == f.ds.size());
    CHECK(all.size() == f.ds.size());
    CHECK(last[0].label == f.ds.class_names[f.ds.windows[0].label]);

    const auto csv = projection_csv(last);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "comp1,comp2,label");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == f.ds.size());

    // Layer 2 scores of the fitted PLS are what `last` exports.
    const auto feats = collect_pool_features(f.params, f.cfg, f.ds);
    const auto scores = pls_transform(model.pls_models[1], feats[1]);
    CHECK(last[7].comp2 == scores.at(7, 1));

    const auto one = lhn_fit(f.params, f.cfg, f.ds, f.options(1));
    CHECK_THROWS_AS(export_projection(one, f.params, f.cfg, f.ds, ProjectionLayers::last), ParameterError);
  }

  TEST_CASE("combined layers separate class centroids at least as well as the last layer") {
    const auto& f = fixture();
    const auto model = lhn_fit(f.params, f.cfg, f.ds, f.options());
    const double last = centroid_separation(export_projection(model, f.params, f.cfg, f.ds, ProjectionLayers::last));
    const double all = centroid_separation(export_projection(model, f.params, f.cfg, f.ds, ProjectionLayers::all));
    MESSAGE("centroid separation last=" << last << " all=" << all);
    CHECK(all >= last);
  }

  TEST_CASE("centroid separation by hand") {
    std::vector<ProjectionRow> rows{{0, 0, "a"}, {2, 0, "a"}, {1, 4, "b"}, {1, 2, "b"}};
    CHECK(centroid_separation(rows) == doctest::Approx(3.0));
  }

  TEST_CASE("model file round trip") {
    const auto& f = fixture();
    for (bool reduce : {true, false}) {
      LhnOptions o = f.options();
      o.reduce = reduce;
      const auto model = lhn_fit(f.params, f.cfg, f.ds, o);
      testing::TempDir dir("llhn");
      save_lhn(dir / "m.llhn", model);
      const auto back = load_lhn(dir / "m.llhn");
      CHECK(serialize_lhn(back) == serialize_lhn(model));
      const auto& x = f.ds.windows[2].values;
      CHECK(lhn_logits(back, f.params, f.cfg, x) == lhn_logits(model, f.params, f.cfg, x));
      auto bytes = serialize_lhn(model);
      bytes.pop_back();
      CHECK_THROWS_AS(deserialize_lhn(bytes), FormatError);
    }
  }
}
