#include "klrom/artifact_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "klrom/errors.hpp"

namespace klrom {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint64_t to_le(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t y = 0;
    for (int i = 0; i < 8; ++i) y |= ((x >> (8 * i)) & 0xff) << (8 * (7 - i));
    return y;
  }
  return x;
}

/// FNV-1a over the little-endian bytes.
std::string checksum(const std::vector<std::uint64_t>& words) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint64_t w : words)
    for (int i = 0; i < 8; ++i) {
      h ^= (w >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {}

  void put(const std::string& name, const Eigen::MatrixXd& m) {
    std::vector<std::uint64_t> words(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::uint64_t w;
      const double d = m.data()[i];
      std::memcpy(&w, &d, 8);
      words[i] = to_le(w);
    }
    const std::string file = name + ".f64";
    std::ofstream out(dir_ / file, std::ios::binary | std::ios::trunc);
    if (!out) throw ArtifactError("cannot write array '" + name + "' in " + dir_.string());
    out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(8 * words.size()));
    if (!out) throw ArtifactError("failed writing array '" + name + "'");
    arrays_[name] = {{"file", file}, {"rows", m.rows()}, {"cols", m.cols()}, {"fnv1a64", checksum(words)}};
  }

  void put_ints(const std::string& name, const std::vector<int>& v) {
    Eigen::MatrixXd m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    put(name, m);
  }

  json arrays_ = json::object();

 private:
  fs::path dir_;
};

class Reader {
 public:
  Reader(fs::path dir, const json& arrays) : dir_(std::move(dir)), arrays_(arrays) {}

  Eigen::MatrixXd get(const std::string& name, Eigen::Index rows = -1, Eigen::Index cols = -1) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw ArtifactError("array '" + name + "' is missing from the manifest");
    const json& a = *it;
    Eigen::Index r = 0, c = 0;
    std::string file, sum;
    try {
      r = a.at("rows").get<Eigen::Index>();
      c = a.at("cols").get<Eigen::Index>();
      file = a.at("file").get<std::string>();
      sum = a.at("fnv1a64").get<std::string>();
    } catch (const json::exception& e) {
      throw ArtifactError("array '" + name + "': malformed manifest entry (" + e.what() + ")");
    }
    if (r < 0 || c < 0) throw ArtifactError("array '" + name + "': negative shape in manifest");
    if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols))
      throw ArtifactError("array '" + name + "': shape mismatch, manifest says " + std::to_string(r) + "x" +
                          std::to_string(c) + " but " + std::to_string(rows >= 0 ? rows : r) + "x" +
                          std::to_string(cols >= 0 ? cols : c) + " is required");
    const fs::path path = dir_ / file;
    std::error_code ec;
    const auto bytes = fs::file_size(path, ec);
    if (ec) throw ArtifactError("array '" + name + "': cannot read " + path.string());
    const auto expected = static_cast<std::uintmax_t>(8) * static_cast<std::uintmax_t>(r) * static_cast<std::uintmax_t>(c);
    if (bytes != expected)
      throw ArtifactError("array '" + name + "': file has " + std::to_string(bytes) + " bytes but the manifest shape " +
                          std::to_string(r) + "x" + std::to_string(c) + " needs " + std::to_string(expected) +
                          (bytes < expected ? " (truncated file or shape mismatch)" : " (shape mismatch)"));
    std::vector<std::uint64_t> words(r * c);
    std::ifstream in(path, std::ios::binary);
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(expected));
    if (!in) throw ArtifactError("array '" + name + "': read failed");
    if (checksum(words) != sum) throw ArtifactError("array '" + name + "': checksum mismatch (corrupted data)");
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const std::uint64_t w = to_le(words[i]);
      std::memcpy(m.data() + i, &w, 8);
    }
    return m;
  }

  Eigen::VectorXd vec(const std::string& name, Eigen::Index size = -1) const { return get(name, size, 1); }

  std::vector<int> ints(const std::string& name, Eigen::Index size = -1) const {
    const Eigen::MatrixXd m = get(name, size, 1);
    std::vector<int> v(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (m(i, 0) != std::floor(m(i, 0))) throw ArtifactError("array '" + name + "': non-integer entry");
      v[i] = static_cast<int>(m(i, 0));
    }
    return v;
  }

 private:
  fs::path dir_;
  const json& arrays_;
};

void check_range(const std::vector<int>& v, int lo, int hi, const std::string& name) {
  for (int x : v)
    if (x < lo || x >= hi) throw ArtifactError("array '" + name + "': index " + std::to_string(x) + " out of range");
}

}  // namespace

void save_artifact(const RomArtifact& art, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ArtifactError("cannot create artifact directory " + dir.string() + ": " + ec.message());

  Writer w(dir);
  const int M = art.parameters.dim();
  w.put("training", art.training);
  w.put("lower", art.parameters.lower);
  w.put("upper", art.parameters.upper);
  w.put("centroids", art.clusters.centroids);
  w.put_ints("assignment", art.clusters.assignment);
  w.put_ints("pattern_rows", art.pattern.rows);
  w.put_ints("pattern_cols", art.pattern.cols);
  {
    std::vector<int> r, c;
    Eigen::VectorXd v(art.gram.nonZeros());
    Eigen::Index k = 0;
    for (int col = 0; col < art.gram.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(art.gram, col); it; ++it) {
        r.push_back(static_cast<int>(it.row()));
        c.push_back(col);
        v[k++] = it.value();
      }
    w.put_ints("gram_rows", r);
    w.put_ints("gram_cols", c);
    w.put("gram_values", v.head(k));
  }

  json clusters = json::array();
  for (std::size_t k = 0; k < art.locals.size(); ++k) {
    const ClusterRom& c = art.locals[k];
    const std::string p = "c" + std::to_string(k) + "_";
    w.put_ints(p + "samples", c.samples);
    w.put(p + "basis", c.basis);
    w.put(p + "singular_values", c.singular_values);
    w.put_ints(p + "a_magic", c.stiffness.magic);
    w.put(p + "a_interpolation", c.stiffness.interpolation);
    w.put(p + "a_singular_values", c.stiffness.singular_values);
    w.put(p + "f_modes", c.load.modes);
    w.put_ints(p + "f_magic", c.load.magic);
    w.put(p + "f_interpolation", c.load.interpolation);
    w.put(p + "f_singular_values", c.load.singular_values);
    for (const auto& [tag, rbf] : {std::pair{"rbf_a_", &c.theta_a}, std::pair{"rbf_f_", &c.theta_f}}) {
      w.put(p + tag + "centers", rbf->centers());
      w.put(p + tag + "weights", rbf->weights());
      w.put(p + tag + "tail", rbf->tail());
    }
    const int N = c.dim();
    Eigen::MatrixXd ra(static_cast<Eigen::Index>(N) * N, c.reduced_a.size());
    for (std::size_t q = 0; q < c.reduced_a.size(); ++q)
      ra.col(q) = Eigen::Map<const Eigen::VectorXd>(c.reduced_a[q].data(), static_cast<Eigen::Index>(N) * N);
    w.put(p + "reduced_a", ra);
    w.put(p + "reduced_f", c.reduced_f);
    clusters.push_back({{"basis_size", N}, {"stiffness_terms", c.stiffness.size()}, {"load_terms", c.load.size()}});
  }

  json m;
  m["format"] = kArtifactFormat;
  m["version"] = kArtifactVersion;
  m["model_name"] = art.model_name;
  m["num_dofs"] = art.num_dofs;
  m["num_parameters"] = M;
  m["parameter_names"] = art.parameters.names;
  m["offline_seconds"] = art.offline_seconds;
  m["cluster_variance"] = art.clusters.variance;
  m["pattern_size"] = art.pattern.size;
  m["settings"] = {{"num_samples", art.settings.num_samples}, {"num_clusters", art.settings.num_clusters},
                   {"eps_pod", art.settings.eps_pod},         {"eps_deim", art.settings.eps_deim},
                   {"seed", art.settings.seed},               {"max_basis", art.settings.max_basis},
                   {"max_terms", art.settings.max_terms}};
  m["clusters"] = clusters;
  m["arrays"] = w.arrays_;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw ArtifactError("cannot write manifest in " + dir.string());
  out << m.dump(2) << "\n";
  if (!out) throw ArtifactError("failed writing manifest in " + dir.string());
}

RomArtifact load_artifact(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ArtifactError("no manifest.json in " + dir.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("manifest.json is not valid JSON: ") + e.what());
  }
  if (!m.is_object() || m.value("format", std::string()) != kArtifactFormat)
    throw ArtifactError("manifest.json does not describe a " + std::string(kArtifactFormat));
  const int version = m.value("version", -1);
  if (version != kArtifactVersion)
    throw ArtifactError("incompatible artifact version " + std::to_string(version) + " (this build reads version " +
                        std::to_string(kArtifactVersion) + ")");

  RomArtifact art;
  try {
    art.model_name = m.at("model_name").get<std::string>();
    art.num_dofs = m.at("num_dofs").get<int>();
    art.parameters.names = m.at("parameter_names").get<std::vector<std::string>>();
    art.offline_seconds = m.at("offline_seconds").get<double>();
    art.clusters.variance = m.at("cluster_variance").get<double>();
    art.pattern.size = m.at("pattern_size").get<int>();
    const json& s = m.at("settings");
    art.settings.num_samples = s.at("num_samples").get<int>();
    art.settings.num_clusters = s.at("num_clusters").get<int>();
    art.settings.eps_pod = s.at("eps_pod").get<double>();
    art.settings.eps_deim = s.at("eps_deim").get<double>();
    art.settings.seed = s.at("seed").get<std::uint64_t>();
    art.settings.max_basis = s.at("max_basis").get<int>();
    art.settings.max_terms = s.at("max_terms").get<int>();
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("manifest.json: ") + e.what());
  }
  const int M = m.value("num_parameters", -1);
  if (M < 1 || static_cast<int>(art.parameters.names.size()) != M)
    throw ArtifactError("manifest.json: inconsistent parameter count");
  if (!m.contains("arrays") || !m["arrays"].is_object()) throw ArtifactError("manifest.json: missing array table");
  if (!m.contains("clusters") || !m["clusters"].is_array()) throw ArtifactError("manifest.json: missing cluster table");

  const Reader r(dir, m["arrays"]);
  const int n = art.num_dofs;
  art.parameters.lower = r.vec("lower", M);
  art.parameters.upper = r.vec("upper", M);
  art.training = r.get("training", M, -1);
  const int ns = static_cast<int>(art.training.cols());
  const int nc = static_cast<int>(m["clusters"].size());
  art.clusters.centroids = r.get("centroids", M, nc);
  art.clusters.assignment = r.ints("assignment", ns);
  check_range(art.clusters.assignment, 0, nc, "assignment");
  art.pattern.rows = r.ints("pattern_rows");
  art.pattern.cols = r.ints("pattern_cols", static_cast<Eigen::Index>(art.pattern.rows.size()));
  check_range(art.pattern.rows, 0, art.pattern.size, "pattern_rows");
  check_range(art.pattern.cols, 0, art.pattern.size, "pattern_cols");
  {
    const auto gr = r.ints("gram_rows");
    const auto gc = r.ints("gram_cols", static_cast<Eigen::Index>(gr.size()));
    const Eigen::VectorXd gv = r.vec("gram_values", static_cast<Eigen::Index>(gr.size()));
    check_range(gr, 0, n, "gram_rows");
    check_range(gc, 0, n, "gram_cols");
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t k = 0; k < gr.size(); ++k) t.emplace_back(gr[k], gc[k], gv[k]);
    art.gram.resize(n, n);
    art.gram.setFromTriplets(t.begin(), t.end());
    art.gram.makeCompressed();
  }

  for (int k = 0; k < nc; ++k) {
    const std::string p = "c" + std::to_string(k) + "_";
    const json& info = m["clusters"][k];
    int N = 0, Qa = 0, Qf = 0;
    try {
      N = info.at("basis_size").get<int>();
      Qa = info.at("stiffness_terms").get<int>();
      Qf = info.at("load_terms").get<int>();
    } catch (const json::exception& e) {
      throw ArtifactError("manifest.json: cluster " + std::to_string(k) + ": " + e.what());
    }
    ClusterRom c;
    c.samples = r.ints(p + "samples");
    check_range(c.samples, 0, ns, p + "samples");
    c.basis = r.get(p + "basis", n, N);
    c.singular_values = r.vec(p + "singular_values");
    c.stiffness.magic = r.ints(p + "a_magic", Qa);
    check_range(c.stiffness.magic, 0, art.pattern.nnz(), p + "a_magic");
    c.stiffness.interpolation = r.get(p + "a_interpolation", Qa, Qa);
    c.stiffness.singular_values = r.vec(p + "a_singular_values");
    c.load.modes = r.get(p + "f_modes", n, Qf);
    c.load.magic = r.ints(p + "f_magic", Qf);
    check_range(c.load.magic, 0, n, p + "f_magic");
    c.load.interpolation = r.get(p + "f_interpolation", Qf, Qf);
    c.load.singular_values = r.vec(p + "f_singular_values");
    const int nk = static_cast<int>(c.samples.size());
    auto rbf = [&](const std::string& tag, int outputs) {
      return RbfInterpolant(r.get(p + tag + "centers", M, nk), r.get(p + tag + "weights", nk, outputs),
                            r.get(p + tag + "tail", M + 1, outputs), art.parameters.lower, art.parameters.upper);
    };
    c.theta_a = rbf("rbf_a_", Qa);
    c.theta_f = rbf("rbf_f_", Qf);
    const Eigen::MatrixXd ra = r.get(p + "reduced_a", static_cast<Eigen::Index>(N) * N, Qa);
    for (int q = 0; q < Qa; ++q) c.reduced_a.push_back(Eigen::Map<const Eigen::MatrixXd>(ra.col(q).data(), N, N));
    c.reduced_f = r.get(p + "reduced_f", N, Qf);
    art.locals.push_back(std::move(c));
  }
  return art;
}

}  // namespace klrom
