#include "dlvmc/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "dlvmc/errors.hpp"

namespace dlvmc {

namespace {

constexpr char kMagic[8] = {'D', 'L', 'V', 'M', 'C', 'C', 'P', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_entry(std::ostream& out, const std::string& name, const Mat& m) {
  write_u64(out, name.size());
  out.write(name.data(), std::streamsize(name.size()));
  write_u64(out, std::uint64_t(m.rows()));
  write_u64(out, std::uint64_t(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            std::streamsize(sizeof(double)) * m.size());
}

std::pair<std::string, Mat> read_entry(std::istream& in) {
  const std::uint64_t name_len = read_u64(in);
  std::string name(name_len, '\0');
  in.read(name.data(), std::streamsize(name_len));
  const std::uint64_t rows = read_u64(in);
  const std::uint64_t cols = read_u64(in);
  Mat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(double)) * m.size());
  if (!in) throw ParseError("checkpoint: truncated entry " + name);
  return {std::move(name), std::move(m)};
}

Mat scalar_mat(std::initializer_list<double> vals) {
  Mat m(1, Eigen::Index(vals.size()));
  Eigen::Index i = 0;
  for (double v : vals) m(0, i++) = v;
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, WfParams& params, const WalkerBatch& batch,
                     const AdamState& adam, long opt_step) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));

  auto refs = param_refs(params);
  std::uint64_t n_entries = refs.size() + 2 * adam.m.size() + 5;
  write_u64(out, n_entries);

  for (const auto& r : refs) write_entry(out, "param." + r.name, *r.mat);
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    write_entry(out, "adam.m." + refs[i].name, adam.m[i]);
    write_entry(out, "adam.v." + refs[i].name, adam.v[i]);
  }
  write_entry(out, "walkers.positions", batch.positions);
  write_entry(out, "walkers.log_abs", batch.log_abs);
  write_entry(out, "walkers.sign", batch.sign);
  write_entry(out, "walkers.scalars", scalar_mat({batch.stepsize, batch.acceptance_ema}));

  // counters kept as exact integers via memcpy into doubles
  Mat counters(1, 5);
  const std::uint64_t ints[5] = {batch.seed, batch.mc_step, std::uint64_t(batch.n_walkers),
                                 std::uint64_t(batch.n_el), std::uint64_t(adam.t)};
  static_assert(sizeof(ints) == 5 * sizeof(double));
  std::memcpy(counters.data(), ints, sizeof(ints));
  write_entry(out, "counters", counters);
  write_u64(out, std::uint64_t(opt_step));
  if (!out) throw ParseError("save_checkpoint: write failed for " + path);
}

CheckpointData load_checkpoint(const std::string& path, WfParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("load_checkpoint: bad magic in " + path);

  const std::uint64_t n_entries = read_u64(in);
  std::map<std::string, Mat> entries;
  for (std::uint64_t i = 0; i < n_entries; ++i) {
    auto [name, m] = read_entry(in);
    entries.emplace(std::move(name), std::move(m));
  }
  CheckpointData data;
  data.opt_step = long(read_u64(in));

  auto take = [&](const std::string& name) -> Mat {
    auto it = entries.find(name);
    if (it == entries.end()) throw ParseError("load_checkpoint: missing entry " + name);
    return std::move(it->second);
  };

  auto refs = param_refs(params);
  data.adam.m.resize(refs.size());
  data.adam.v.resize(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    Mat m = take("param." + refs[i].name);
    if (m.rows() != refs[i].mat->rows() || m.cols() != refs[i].mat->cols())
      throw ConfigError("load_checkpoint: shape mismatch for " + refs[i].name);
    *refs[i].mat = std::move(m);
    data.adam.m[i] = take("adam.m." + refs[i].name);
    data.adam.v[i] = take("adam.v." + refs[i].name);
  }

  data.batch.positions = take("walkers.positions");
  data.batch.log_abs = take("walkers.log_abs").col(0);
  data.batch.sign = take("walkers.sign").col(0);
  const Mat scalars = take("walkers.scalars");
  data.batch.stepsize = scalars(0, 0);
  data.batch.acceptance_ema = scalars(0, 1);
  const Mat counters = take("counters");
  std::uint64_t ints[5];
  std::memcpy(ints, counters.data(), sizeof(ints));
  data.batch.seed = ints[0];
  data.batch.mc_step = ints[1];
  data.batch.n_walkers = int(ints[2]);
  data.batch.n_el = int(ints[3]);
  data.adam.t = long(ints[4]);
  return data;
}

}  // namespace dlvmc
