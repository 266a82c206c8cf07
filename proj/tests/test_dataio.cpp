#include <doctest.h>

#include "repshift/dataio.hpp"
#include "repshift/errors.hpp"

#include <cmath>
#include <sstream>

using namespace repshift;

namespace {

const PanelSchema kSchema{"station", {"temp", "rain"}, "pm"};
const PanelSchema kTargetSchema{"station", {"temp", "rain"}, ""};

Panel parse(const std::string& text, const PanelSchema& schema = kSchema) {
    std::istringstream is(text);
    return read_panel_csv(is, schema);
}

PreprocessSpec identity_spec() {
    PreprocessSpec s;
    s.response_col = "pm";
    s.rescale = Rescale::none;
    return s;
}

}  // namespace

TEST_CASE("panel csv groups rows by subject in file order") {
    const auto p = parse(
        "station,temp,rain,pm\n"
        "b,1.5,0,10\n"
        "a,2,0.1,11\n"
        "b,2.5,0.2,12\n"
        "a,3,0.3,13\n"
        "b,3.5,0.4,14\n"
        "a,4,0.5,15\n");
    REQUIRE(p.data.num_subjects() == 2);
    CHECK(p.data.subject(0).id == "b");
    CHECK(p.data.subject(0).num_observations() == 3);
    CHECK(p.data.subject(1).num_observations() == 3);
    CHECK(p.data.subject(0).x(0, 1) == 2.5);
    CHECK(p.data.subject(1).y[2] == 15.0);
    CHECK(p.covariate_names == std::vector<std::string>{"temp", "rain"});
}

TEST_CASE("panel csv errors") {
    CHECK_THROWS_AS(parse("station,temp,rain,pm\n"), EmptyInputError);
    CHECK_THROWS_AS(parse(""), EmptyInputError);
    CHECK_THROWS_AS(parse("station,temp,pm\na,1,2\n"), SchemaError);
    try {
        parse("station,temp,rain,pm\na,1,2,3\na,1,2\n");
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse("station,temp,rain,pm\na,1,zz,3\n"), ParseError);
    CHECK_THROWS_AS(parse("station,temp,rain,pm\na,1,2,3\n", PanelSchema{"station", {"pm"}, "pm"}), SchemaError);
}

TEST_CASE("missing tokens and quoted fields") {
    const auto p = parse("station,temp,rain,pm\n\"s,1\",NA,,3\n\"s,1\",1,2,nan\n");
    CHECK(p.data.subject(0).id == "s,1");
    CHECK(std::isnan(p.data.subject(0).x(0, 0)));
    CHECK(std::isnan(p.data.subject(0).x(1, 0)));
    CHECK(std::isnan(p.data.subject(0).y[1]));
    CHECK(split_csv_line("a,\"b \"\"c\"\"\",d") == std::vector<std::string>{"a", "b \"c\"", "d"});
}

TEST_CASE("dataset csv round-trips to the last bit") {
    RepeatedDataset d(2);
    Eigen::MatrixXd x(2, 2);
    x << 0.1, 1.0 / 3.0, std::nextafter(0.5, 1.0), 1e-300;
    d.add(Subject{"s0", x, Eigen::Vector2d(std::acos(-1.0), -2.0 / 7.0)});
    d.add(Subject{"s1", x.leftCols(1), Eigen::VectorXd::Constant(1, 1e10 / 3.0)});
    std::stringstream ss;
    write_dataset_csv(ss, d, "seed=4 case=case1");
    CHECK(ss.str().rfind("# seed=4 case=case1\nsubject_id,obs_id,x_1,x_2,y\n", 0) == 0);
    const auto back = read_dataset_csv(ss);
    CHECK(back.manifest == "seed=4 case=case1");
    REQUIRE(back.data.num_subjects() == 2);
    CHECK(back.data.covariates() == d.covariates());
    CHECK(back.data.responses() == d.responses());
    CHECK(back.data.subject(1).id == "s1");

    RepeatedDataset bare(1);
    bare.add(Subject{"z", Eigen::MatrixXd::Constant(1, 2, 0.25), {}});
    std::stringstream bs;
    write_dataset_csv(bs, bare);
    const auto bb = read_dataset_csv(bs);
    CHECK_FALSE(bb.data.has_responses());
    CHECK(bb.manifest.empty());

    std::istringstream no_obs("subject_id,x_1\na,0.5\n");
    CHECK_THROWS_AS(read_dataset_csv(no_obs), SchemaError);
}

TEST_CASE("identity preprocessing leaves clean data alone") {
    const auto p = parse("station,temp,rain,pm\na,1,2,3\na,4,5,6\nb,7,8,9\n");
    const auto out = preprocess(p, identity_spec());
    CHECK(out.data.covariates() == p.data.covariates());
    CHECK(out.data.responses() == p.data.responses());
    const auto again = preprocess(out, identity_spec());
    CHECK(again.data.covariates() == out.data.covariates());
}

TEST_CASE("rows with missing values are dropped") {
    const auto p = parse("station,temp,rain,pm\na,1,2,3\na,NA,5,6\na,7,8,9\nb,1,1,1\n");
    const auto out = preprocess(p, identity_spec());
    REQUIRE(out.data.num_subjects() == 2);
    CHECK(out.data.subject(0).num_observations() == 2);
    CHECK(out.data.subject(0).x(0, 1) == 7.0);
    CHECK(out.data.subject(1).num_observations() == 1);
}

TEST_CASE("target subjects with any missing value are removed") {
    const auto src = parse("station,temp,rain,pm\na,1,2,3\na,2,3,4\n");
    const auto tgt = parse("station,temp,rain\nx,1,2\nx,1,2\ny,1.5,2.5\ny,NA,2\n", kTargetSchema);
    auto spec = identity_spec();
    const auto res = preprocess(src, tgt, spec);
    CHECK(res.dropped_subjects == 1);
    REQUIRE(res.target.data.num_subjects() == 1);
    CHECK(res.target.data.subject(0).id == "x");
}

TEST_CASE("hour truncation keeps the leading observations") {
    const auto p = parse("station,temp,rain,pm\na,1,1,1\na,2,2,2\na,3,3,3\nb,4,4,4\n");
    auto spec = identity_spec();
    spec.hours_retained = 2;
    const auto out = preprocess(p, spec);
    CHECK(out.data.subject(0).num_observations() == 2);
    CHECK(out.data.subject(0).x(0, 1) == 2.0);
    CHECK(out.data.subject(1).num_observations() == 1);
}

TEST_CASE("transforms") {
    const auto p = parse("station,temp,rain,pm\na,1,0,1\na,2,0,2.718281828459045\n");
    auto spec = identity_spec();
    spec.log1p_cols = {"rain"};
    spec.response_transform = ResponseTransform::log;
    const auto out = preprocess(p, spec);
    CHECK((out.data.subject(0).x.row(1).array() == 0.0).all());
    CHECK(out.data.subject(0).y[0] == 0.0);
    CHECK(out.data.subject(0).y[1] == doctest::Approx(1.0));

    CHECK_THROWS_AS(preprocess(parse("station,temp,rain,pm\na,1,-1,1\n"), spec), PreprocessError);
    CHECK_THROWS_AS(preprocess(parse("station,temp,rain,pm\na,1,0,0\n"), spec), PreprocessError);
    spec.log1p_cols = {"wind"};
    CHECK_THROWS_AS(preprocess(p, spec), SchemaError);
    CHECK_THROWS_AS(preprocess(parse("station,temp,rain,pm\na,NA,1,1\nb,NA,2,2\n"), identity_spec()),
                    PreprocessError);
}

TEST_CASE("min-max scaling uses source ranges and clamps the target") {
    const auto src = parse("station,temp,rain,pm\na,0,10,1\na,10,20,1\n");
    const auto tgt = parse("station,temp,rain\nx,5,30\nx,-5,15\n", kTargetSchema);
    auto spec = identity_spec();
    spec.rescale = Rescale::minmax_to_unit_cube;
    const auto res = preprocess(src, tgt, spec);
    REQUIRE(res.scaler.has_value());
    CHECK(res.source.data.subject(0).x(0, 1) == 1.0);
    CHECK(res.target.data.subject(0).x(0, 0) == 0.5);
    CHECK(res.target.data.subject(0).x(1, 0) == 1.0);
    CHECK(res.target.data.subject(0).x(0, 1) == 0.0);
    CHECK(res.target_clamped == 2);
    CHECK(res.target_clamped_fraction == 0.5);
    res.target.data.check_unit_cube();

    spec.scaling_range = ScalingRange::joint;
    const auto joint = preprocess(src, tgt, spec);
    CHECK(joint.target_clamped == 0);
    CHECK(joint.scaler->min[0] == -5.0);

    std::stringstream ss;
    res.scaler->save(ss);
    const auto back = MinMaxScaler::load(ss);
    CHECK(back.names == res.scaler->names);
    CHECK(back.min == res.scaler->min);
    CHECK(back.max == res.scaler->max);

    std::istringstream bad("# column min max\ntemp 0\n");
    CHECK_THROWS_AS(MinMaxScaler::load(bad), ParseError);
}

TEST_CASE("binned mse") {
    Eigen::VectorXd t(100);
    for (int i = 0; i < 100; ++i) t[i] = i + 1;
    const auto exact = binned_mse(t, t);
    for (const auto& b : exact) CHECK(b.mse == 0.0);

    const auto shifted = binned_mse(t, (t.array() + 1.0).matrix());
    REQUIRE(shifted.size() == 10);
    std::size_t total = 0;
    for (const auto& b : shifted) {
        CHECK(b.mse == 1.0);
        CHECK(b.count == 10);
        total += b.count;
    }
    CHECK(total == 100);
    CHECK(shifted[0].mean_true == 5.5);

    const auto single = binned_mse(t.head(10), t.head(10), 10);
    for (const auto& b : single) CHECK(b.count == 1);

    const auto uneven = binned_mse(t.head(23), t.head(23), 10);
    std::size_t lo = 100, hi = 0;
    for (const auto& b : uneven) {
        lo = std::min(lo, b.count);
        hi = std::max(hi, b.count);
    }
    CHECK(hi - lo <= 1);

    CHECK_THROWS_AS(binned_mse(t, t.head(5)), ShapeError);
    CHECK_THROWS_AS(binned_mse(Eigen::VectorXd(), Eigen::VectorXd()), EmptyInputError);
    CHECK_THROWS_AS(binned_mse(t.head(3), t.head(3), 4), DomainError);

    std::ostringstream os;
    write_binned_csv(os, binned_mse(t.head(2), t.head(2), 2));
    CHECK(os.str().rfind("bin,mean_true,mse,count\n1,1,0,1\n", 0) == 0);
}
