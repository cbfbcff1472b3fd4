#include "ffevss/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ffevss/errors.hpp"

namespace ffevss::nn {

namespace {

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}

  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void text(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void matrix(const Matrix& m) {
    pod<std::int64_t>(m.rows());
    pod<std::int64_t>(m.cols());
    out_.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  std::string text() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 30)) fail("string length out of range");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  Matrix matrix() {
    const auto rows = pod<std::int64_t>();
    const auto cols = pod<std::int64_t>();
    if (rows < 0 || cols < 0 || rows * cols > (1ll << 28)) fail("tensor shape out of range");
    Matrix m(rows, cols);
    in_.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    check();
    return m;
  }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_ + ": " + what); }

 private:
  void check() const {
    if (!in_) fail("truncated checkpoint");
  }
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

const ParamStore& Checkpoint::store(const std::string& name) const {
  for (const auto& [n, s] : stores)
    if (n == name) return s;
  throw ParseError("checkpoint has no store named " + name);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    Writer w(out);
    out.write(Checkpoint::kMagic, sizeof(Checkpoint::kMagic));
    w.pod(Checkpoint::kVersion);
    w.text(checkpoint.metadata);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.stores.size()));
    for (const auto& [name, store] : checkpoint.stores) {
      w.text(name);
      w.pod<std::int64_t>(store.adam_steps());
      w.text(store.rng_state());
      w.pod<std::uint32_t>(static_cast<std::uint32_t>(store.size()));
      for (const Parameter& p : store) {
        w.text(p.name);
        w.matrix(p.value);
        w.matrix(p.first_moment);
        w.matrix(p.second_moment);
      }
    }
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  Reader r(in, path.string());
  char magic[sizeof(Checkpoint::kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, Checkpoint::kMagic, sizeof(magic)) != 0) r.fail("not a checkpoint file");
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) r.fail("unsupported checkpoint version " + std::to_string(version));

  Checkpoint cp;
  cp.metadata = r.text();
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t s = 0; s < count; ++s) {
    std::string name = r.text();
    ParamStore store;
    store.set_adam_steps(static_cast<int>(r.pod<std::int64_t>()));
    store.set_rng_state(r.text());
    const auto params = r.pod<std::uint32_t>();
    for (std::uint32_t k = 0; k < params; ++k) {
      std::string pname = r.text();
      Matrix value = r.matrix();
      Matrix m1 = r.matrix();
      Matrix m2 = r.matrix();
      if (m1.rows() != value.rows() || m1.cols() != value.cols() || m2.rows() != value.rows() ||
          m2.cols() != value.cols())
        r.fail("moment shape differs from " + pname);
      const std::size_t idx = store.add(pname, std::move(value));
      store[idx].first_moment = std::move(m1);
      store[idx].second_moment = std::move(m2);
    }
    cp.stores.emplace_back(std::move(name), std::move(store));
  }
  return cp;
}

}  // namespace ffevss::nn
