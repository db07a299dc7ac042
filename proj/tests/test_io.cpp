#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <unistd.h>
#include <json.hpp>

#include "klrom/artifact_io.hpp"
#include "klrom/config.hpp"
#include "klrom/errors.hpp"
#include "klrom/vtk.hpp"

using namespace klrom;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kFixtures = KLROM_FIXTURE_DIR;
const std::string kData = KLROM_TEST_DATA;

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_roof_json() { return json::parse(read_file(kData + "/small_roof.json")); }

/// Issues of a rejected configuration.
std::vector<std::string> issues_of(const json& j) {
  try {
    parse_config(j.dump());
  } catch (const ConfigError& e) {
    return e.issues();
  }
  return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& path) {
  for (const auto& s : issues)
    if (s.rfind(path, 0) == 0) return true;
  return false;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("klrom_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, FixturesParse) {
  for (const char* f : {"scordelis_lo_holes.json", "scordelis_lo_multipatch.json", "trimmed_planar_conforming.json",
                        "trimmed_planar_nonconforming.json"})
    EXPECT_NO_THROW(build_model(load_config(kFixtures + "/" + f))) << f;
}

TEST(Config, RoundTripIsCanonical) {
  for (const char* f : {"scordelis_lo_holes.json", "trimmed_planar_nonconforming.json"}) {
    const ModelConfig a = load_config(kFixtures + "/" + f);
    const std::string text = serialize_config(a);
    const ModelConfig b = parse_config(text);
    EXPECT_EQ(serialize_config(b), text) << f;
    EXPECT_EQ(build_model(b).num_dofs(), build_model(a).num_dofs());
  }
}

TEST(Config, UnknownKeyNamesPath) {
  json j = small_roof_json();
  j["patches"][1]["analysis"]["degre"] = 2;
  EXPECT_TRUE(mentions(issues_of(j), "$.patches[1].analysis.degre"));
}

TEST(Config, TypeErrorsNamePath) {
  json j = small_roof_json();
  j["material"]["E"] = "stiff";
  j["rom"]["num_samples"] = 2.5;
  const auto issues = issues_of(j);
  EXPECT_TRUE(mentions(issues, "$.material.E"));
  EXPECT_TRUE(mentions(issues, "$.rom.num_samples"));
  EXPECT_GE(issues.size(), 2u);
}

TEST(Config, MissingRequired) {
  json j = small_roof_json();
  j.erase("parameters");
  EXPECT_TRUE(mentions(issues_of(j), "$.parameters"));
}

TEST(Config, SemanticChecks) {
  json j = small_roof_json();
  j["parameters"]["lower"] = {5.0};
  j["parameters"]["upper"] = {1.0};
  j["material"]["nu"] = 0.5;
  j["interfaces"][0]["b"]["patch"] = 7;
  const auto issues = issues_of(j);
  EXPECT_TRUE(mentions(issues, "$.parameters"));
  EXPECT_TRUE(mentions(issues, "$.material"));
  EXPECT_TRUE(mentions(issues, "$.interfaces[0].b.patch"));
}

TEST(Config, ErsatzRange) {
  json j = small_roof_json();
  j["quadrature"]["ersatz"] = 1.0;
  EXPECT_TRUE(mentions(issues_of(j), "$.quadrature.ersatz"));
}

TEST(Config, InvalidJson) {
  EXPECT_THROW(parse_config("{\"name\": "), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ParameterList) {
  const ParamVector v = parse_parameter_list(" 0.5, 2 ", 2);
  EXPECT_EQ(v[0], 0.5);
  EXPECT_EQ(v[1], 2.0);
  EXPECT_THROW(parse_parameter_list("0.5", 2), Error);
  EXPECT_THROW(parse_parameter_list("0.5,abc", 2), Error);
}

class ArtifactIo : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg = new ModelConfig(load_config(kData + "/small_roof.json"));
    art = new RomArtifact(train(build_model(*cfg), cfg->rom));
  }
  static void TearDownTestSuite() {
    delete art;
    delete cfg;
  }
  static ModelConfig* cfg;
  static RomArtifact* art;
};
ModelConfig* ArtifactIo::cfg = nullptr;
RomArtifact* ArtifactIo::art = nullptr;

TEST_F(ArtifactIo, RoundTripBitExact) {
  const fs::path dir = scratch("roundtrip");
  save_artifact(*art, dir);
  const RomArtifact back = load_artifact(dir);
  const Eigen::MatrixXd tests = uniform_samples(art->parameters, 4, 8);
  for (int i = 0; i < tests.cols(); ++i) {
    const RomSolution a = rom_solve(*art, tests.col(i)), b = rom_solve(back, tests.col(i));
    EXPECT_EQ(a.cluster, b.cluster);
    EXPECT_EQ(a.compliance, b.compliance);
    EXPECT_EQ(a.full, b.full);
  }
  EXPECT_EQ(back.training, art->training);
  EXPECT_EQ(back.clusters.centroids, art->clusters.centroids);
  for (std::size_t k = 0; k < art->locals.size(); ++k) {
    EXPECT_EQ(back.locals[k].basis, art->locals[k].basis);
    EXPECT_EQ(back.locals[k].stiffness.magic, art->locals[k].stiffness.magic);
    EXPECT_EQ(back.locals[k].theta_a.weights(), art->locals[k].theta_a.weights());
  }
  // saving the loaded artifact again reproduces every array file
  const fs::path again = scratch("again");
  save_artifact(back, again);
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".f64")
      EXPECT_EQ(read_file(e.path()), read_file(again / e.path().filename())) << e.path().filename();
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST_F(ArtifactIo, VersionMismatch) {
  const fs::path dir = scratch("version");
  save_artifact(*art, dir);
  json m = json::parse(read_file(dir / "manifest.json"));
  m["version"] = kArtifactVersion + 1;
  std::ofstream(dir / "manifest.json") << m.dump(2);
  EXPECT_THROW(load_artifact(dir), ArtifactError);
  fs::remove_all(dir);
}

TEST_F(ArtifactIo, ShapeMismatchNamesArray) {
  const fs::path dir = scratch("shape");
  save_artifact(*art, dir);
  json m = json::parse(read_file(dir / "manifest.json"));
  m["arrays"]["c0_basis"]["cols"] = m["arrays"]["c0_basis"]["cols"].get<int>() + 1;
  std::ofstream(dir / "manifest.json") << m.dump(2);
  try {
    load_artifact(dir);
    FAIL() << "expected ArtifactError";
  } catch (const ArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("c0_basis"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_F(ArtifactIo, CorruptedData) {
  const fs::path dir = scratch("corrupt");
  save_artifact(*art, dir);
  {
    std::fstream f(dir / "c1_reduced_a.f64", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put('\x7f');
  }
  EXPECT_THROW(load_artifact(dir), ArtifactError);
  fs::remove(dir / "c1_reduced_a.f64");
  EXPECT_THROW(load_artifact(dir), ArtifactError);
  fs::remove_all(dir);
  EXPECT_THROW(load_artifact(dir), ArtifactError);
}

TEST_F(ArtifactIo, LittleEndianLayout) {
  const fs::path dir = scratch("layout");
  save_artifact(*art, dir);
  const std::string raw = read_file(dir / "lower.f64");
  ASSERT_EQ(raw.size(), 8u);
  double v;
  std::memcpy(&v, raw.data(), 8);
  EXPECT_EQ(v, art->parameters.lower[0]);
  fs::remove_all(dir);
}

TEST(Vtk, TrimmedPlateArea) {
  const ModelConfig cfg = load_config(kFixtures + "/scordelis_lo_holes.json");
  ModelConfig plate = cfg;
  plate.patches[0].geometry = GeometryConfig{};
  plate.patches[0].analysis.elements = {8, 8};
  plate.patches[0].trims.resize(1);
  const Model m = build_model(plate);
  const ParamVector mu = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(m.num_dofs());
  std::ostringstream os;
  const VtkStats st = write_vtk(os, m, mu, u, 8);
  const std::string text = os.str();
  EXPECT_EQ(text.rfind("# vtk DataFile Version", 0), 0u);
  EXPECT_NE(text.find("DATASET UNSTRUCTURED_GRID"), std::string::npos);
  EXPECT_NE(text.find("POINTS " + std::to_string(st.points)), std::string::npos);
  EXPECT_NE(text.find("CELLS " + std::to_string(st.cells) + " " + std::to_string(5 * st.cells)), std::string::npos);
  EXPECT_NE(text.find("VECTORS displacement"), std::string::npos);
  // cells are kept by their centers, so the area is close to 1 - pi r^2
  EXPECT_NEAR(st.area, 1.0 - M_PI * 0.04, 5e-3);
}
