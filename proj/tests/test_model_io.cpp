#include <filesystem>
#include <string>

#include "doctest.h"
#include "rpcompass/errors.hpp"
#include "rpcompass/model_io.hpp"
#include "test_support.hpp"

using namespace rpcompass;

namespace {

const char* kOneNitrogen = R"(
name = "n5"   # trailing comment
[rates]
k_b_per_us = 2.0
k_f_per_us = 0.5

[[nuclei]]
label = "N5"
radical = "A"
multiplicity = 3
tensor_mT = [-0.1, 0.0, 0.0,
              0.0, -0.1, 0.0,
              0.0,  0.0, 1.8]
)";

}  // namespace

TEST_CASE("minimal file has no nuclei") {
  const SpinSystem s = parse_spin_system("name = \"bare\"\n");
  CHECK(s.name == "bare");
  CHECK(s.hilbert_dimension() == 4);
  CHECK(s.k_b == 1.0);
  CHECK(s.k_f == 1.0);
  CHECK(s.g_factor == 2.0013);
  CHECK_FALSE(s.eed_mT.has_value());
}

TEST_CASE("one spin-1 nucleus with multi-line tensor") {
  const SpinSystem s = parse_spin_system(kOneNitrogen);
  CHECK(s.hilbert_dimension() == 12);
  CHECK(s.k_b == 2.0);
  CHECK(s.k_f == 0.5);
  REQUIRE(s.nuclei.size() == 1);
  CHECK(s.nuclei[0].label == "N5");
  CHECK(s.nuclei[0].radical == Radical::A);
  CHECK(s.nuclei[0].hyperfine_mT(2, 2) == 1.8);
  CHECK(s.nuclei[0].hyperfine_mT(0, 0) == -0.1);
}

TEST_CASE("parse errors name the field") {
  SUBCASE("short tensor row") {
    const std::string text = "name = \"x\"\n[[nuclei]]\nlabel = \"H\"\nradical = \"A\"\nmultiplicity = 2\n"
                             "tensor_mT = [1.0, 2.0]\n";
    try {
      parse_spin_system(text, "short.tomlish");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.field() == "nuclei[0].tensor_mT");
      CHECK(e.line() == 6);
      CHECK(std::string(e.what()).find("got 2") != std::string::npos);
    }
  }
  SUBCASE("bad radical") {
    CHECK_THROWS_AS(parse_spin_system("name = \"x\"\n[[nuclei]]\nradical = \"C\"\n"), ParseError);
  }
  SUBCASE("unknown key") {
    try {
      parse_spin_system("name = \"x\"\n[rates]\nk_q_per_us = 1\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.field() == "rates.k_q_per_us");
    }
  }
  SUBCASE("missing name") { CHECK_THROWS_AS(parse_spin_system("g_factor = 2.0\n"), ParseError); }
  SUBCASE("missing nucleus field") {
    try {
      parse_spin_system("name = \"x\"\n[[nuclei]]\nlabel = \"H\"\nradical = \"A\"\nmultiplicity = 2\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.field() == "nuclei[0].tensor_mT");
    }
  }
  SUBCASE("non-numeric entry") {
    CHECK_THROWS_AS(parse_spin_system("name = \"x\"\n[eed]\npoint_dipole_r_nm = [1, two, 3]\n"), ParseError);
  }
  SUBCASE("dipole too close") {
    CHECK_THROWS_AS(parse_spin_system("name = \"x\"\n[eed]\npoint_dipole_r_nm = [0.05, 0, 0]\n"), ParseError);
  }
  SUBCASE("unknown section") { CHECK_THROWS_AS(parse_spin_system("name = \"x\"\n[other]\n"), ParseError); }
}

TEST_CASE("validation errors after parsing") {
  SUBCASE("k_f = 0") {
    try {
      parse_spin_system("name = \"x\"\n[rates]\nk_f_per_us = 0.0\n");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.invariant() == "k_f > 0");
    }
  }
  SUBCASE("non-traceless EED") {
    try {
      parse_spin_system("name = \"x\"\n[eed]\ntensor_mT = [1, 0, 0, 0, 1, 0, 0, 0, 1]\n");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.invariant() == "EED traceless");
    }
  }
  SUBCASE("dimension cap") {
    CHECK_THROWS_AS(parse_spin_system(kOneNitrogen, "cap", 8), CapacityError);
  }
}

TEST_CASE("missing file names the path") {
  try {
    load_spin_system("/nonexistent/dir/model.tomlish");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("/nonexistent/dir/model.tomlish") != std::string::npos);
  }
}

TEST_CASE("format round-trips") {
  std::mt19937_64 rng(21);
  for (std::size_t n = 0; n <= 3; ++n) {
    SpinSystem s = rptest::random_system(rng, n);
    s.name = "rt" + std::to_string(n);
    s.k_b = 0.3;
    s.k_f = 1.7;
    const SpinSystem back = parse_spin_system(format_spin_system(s));
    CHECK(back == s);
  }
}

TEST_CASE("shipped models load and validate") {
  for (const char* name :
       {"fad_z_1n", "fad_w_1n", "fad_w_2n", "fad_z_3n", "fad_w_3n", "null_bare_pair"}) {
    CAPTURE(name);
    const SpinSystem s = rptest::load_model(name);
    CHECK(s.name == name);
    CHECK(s.hilbert_dimension() <= 48);
    CHECK(s.k_b == 1.0);
    CHECK(s.k_f == 1.0);
    for (const auto& n : s.nuclei) CHECK((n.multiplicity == 2 || n.multiplicity == 3));
  }
  const SpinSystem z1 = rptest::load_model("fad_z_1n");
  CHECK(z1.hilbert_dimension() == 12);
  CHECK(z1.nuclei[0].radical == Radical::A);
  const SpinSystem w2 = rptest::load_model("fad_w_2n");
  CHECK(w2.nuclei[0].radical == Radical::A);
  CHECK(w2.nuclei[1].radical == Radical::B);
}
