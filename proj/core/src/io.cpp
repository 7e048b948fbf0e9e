#include "mfpe/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "mfpe/error.hpp"

namespace mfpe {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'F', 'P', 'E'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
}

template <class T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bits{};
  if (!in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size())))
    throw Error(ErrorCode::kInvalidArgument, "ensemble file is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

void write_ensemble_csv(const PathEnsemble& ens, std::ostream& out) {
  out << "pathId,time,state\n";
  for (std::size_t p = 0; p < ens.retained(); ++p)
    for (std::size_t t = 0; t < ens.times.size(); ++t)
      out << ens.path_ids[p] << ',' << format_double(ens.times[t]) << ',' << format_double(ens.state(p, t)) << '\n';
}

void write_ensemble_binary(const PathEnsemble& ens, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, ens.retained());
  put<std::uint64_t>(out, ens.times.size());
  put<std::uint64_t>(out, static_cast<std::uint64_t>(ens.requested));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(ens.flagged));
  put<std::uint64_t>(out, ens.seed);
  put<double>(out, ens.epsilon);
  for (double t : ens.times) put<double>(out, t);
  for (auto id : ens.path_ids) put<std::uint64_t>(out, id);
  for (double x : ens.states) put<double>(out, x);
}

PathEnsemble read_ensemble_binary(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw Error(ErrorCode::kInvalidArgument, "not an MFPE ensemble file");
  if (get<std::uint32_t>(in) != kVersion) throw Error(ErrorCode::kInvalidArgument, "unsupported ensemble version");
  PathEnsemble ens;
  const auto paths = get<std::uint64_t>(in);
  const auto times = get<std::uint64_t>(in);
  ens.requested = static_cast<std::int64_t>(get<std::uint64_t>(in));
  ens.flagged = static_cast<std::int64_t>(get<std::uint64_t>(in));
  ens.seed = get<std::uint64_t>(in);
  ens.epsilon = get<double>(in);
  ens.times.resize(times);
  for (auto& t : ens.times) t = get<double>(in);
  ens.path_ids.resize(paths);
  for (auto& id : ens.path_ids) id = get<std::uint64_t>(in);
  ens.states.resize(paths * times);
  for (auto& x : ens.states) x = get<double>(in);
  return ens;
}

void write_density_csv(const DensityGrid& d, std::ostream& out) {
  out << "x,value\n";
  for (int j = 0; j < d.grid.n; ++j)
    out << format_double(d.grid.center(j)) << ',' << format_double(d.values[static_cast<std::size_t>(j)]) << '\n';
}

DensityGrid read_density_csv(std::istream& in, double time) {
  std::string line;
  if (!std::getline(in, line) || line != "x,value")
    throw Error(ErrorCode::kInvalidArgument, "density file must start with the header x,value");
  std::vector<double> xs, vs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "malformed density row: " + line);
    try {
      xs.push_back(std::stod(line.substr(0, comma)));
      vs.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "malformed density row: " + line);
    }
  }
  if (xs.size() < 2) throw Error(ErrorCode::kInvalidArgument, "density file needs at least two rows");
  const double dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
  DensityGrid out(GridSpec{xs.front() - 0.5 * dx, xs.back() + 0.5 * dx, static_cast<int>(xs.size())}, time);
  out.values = std::move(vs);
  return out;
}

std::string to_json(const ComparisonReport& r) {
  nlohmann::ordered_json j;
  j["l1Distance"] = r.l1_distance;
  j["ksStatistic"] = r.ks_statistic;
  j["mcStdErrBand"] = r.mc_stderr_band;
  j["massAccounting"] = {{"mcFlagged", r.mass.mc_flagged}, {"fpeLeak", r.mass.fpe_leak}};
  j["tolerance"] = r.tolerance;
  j["verdict"] = r.pass ? "pass" : "fail";
  return j.dump(2) + "\n";
}

}  // namespace mfpe
