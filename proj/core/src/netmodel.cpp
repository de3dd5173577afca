#include "psync/netmodel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "psync/errors.hpp"

namespace psync {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Line {
  int number = 0;
  std::string_view text;
};

// Strips '%' comments and trailing whitespace.
std::string_view strip(std::string_view s) {
  if (auto pos = s.find('%'); pos != std::string_view::npos) s = s.substr(0, pos);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  return s;
}

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  int number = 1;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back({number, text.substr(start, end - start)});
    start = end + 1;
    ++number;
  }
  return lines;
}

std::vector<double> parse_row(const Line& line, std::string_view body) {
  std::vector<double> vals;
  size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() &&
           (std::isspace(static_cast<unsigned char>(body[i])) || body[i] == ',' || body[i] == ';'))
      ++i;
    if (i >= body.size()) break;
    size_t j = i;
    while (j < body.size() && !std::isspace(static_cast<unsigned char>(body[j])) &&
           body[j] != ',' && body[j] != ';')
      ++j;
    double v = 0.0;
    auto [p, ec] = std::from_chars(body.data() + i, body.data() + j, v);
    if (ec != std::errc() || p != body.data() + j)
      throw ParseError(line.number, "malformed numeric field '" +
                                         std::string(body.substr(i, j - i)) + "'");
    vals.push_back(v);
    i = j;
  }
  return vals;
}

double field(const std::vector<double>& row, size_t col_1based, double fallback) {
  return row.size() >= col_1based ? row[col_1based - 1] : fallback;
}

}  // namespace

int Network::index_of(int bus_id) const {
  auto it = id_to_index.find(bus_id);
  if (it == id_to_index.end())
    throw ValidationError("unknown bus id " + std::to_string(bus_id));
  return it->second;
}

std::vector<cplx> Network::case_voltage() const {
  std::vector<cplx> v(buses.size());
  for (size_t i = 0; i < buses.size(); ++i)
    v[i] = std::polar(buses[i].Vm, buses[i].Va * kDegToRad);
  return v;
}

bool Network::flat_profile() const {
  if (buses.empty()) return true;
  for (const auto& b : buses)
    if (std::abs(b.Va - buses[0].Va) > 1e-12) return false;
  return true;
}

void Network::validate() const {
  if (buses.empty()) throw ValidationError("case has no buses");
  if (base_MVA <= 0.0) throw ValidationError("base MVA must be positive");
  for (const auto& b : buses)
    if (b.Vm <= 0.0)
      throw ValidationError("bus " + std::to_string(b.id) + ": Vm must be positive");
  for (size_t k = 0; k < branches.size(); ++k) {
    const auto& br = branches[k];
    if (br.from_idx < 0 || br.to_idx < 0)
      throw ValidationError("branch " + std::to_string(k) + ": unresolved endpoint");
    if (br.r == 0.0 && br.x == 0.0)
      throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + ": zero series impedance");
  }
  // connectivity of the in-service graph
  std::vector<std::vector<int>> adj(buses.size());
  for (const auto& br : branches) {
    adj[br.from_idx].push_back(br.to_idx);
    adj[br.to_idx].push_back(br.from_idx);
  }
  std::vector<char> seen(buses.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  size_t visited = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int w : adj[u])
      if (!seen[w]) {
        seen[w] = 1;
        ++visited;
        stack.push_back(w);
      }
  }
  if (visited != buses.size())
    throw ValidationError("in-service network is disconnected (" + std::to_string(visited) +
                          " of " + std::to_string(buses.size()) + " buses reachable)");
}

Network parse_case(std::string_view text) {
  Network net;
  bool saw_base = false, saw_bus = false, saw_branch = false;

  auto lines = split_lines(text);
  size_t li = 0;
  while (li < lines.size()) {
    std::string_view s = strip(lines[li].text);
    if (s.empty() || s.starts_with("function")) {
      ++li;
      continue;
    }
    auto eq = s.find('=');
    if (!s.starts_with("mpc.") || eq == std::string_view::npos) {
      ++li;
      continue;
    }
    std::string_view name = strip(s.substr(4, eq - 4));
    std::string_view rhs = strip(s.substr(eq + 1));

    if (name == "baseMVA") {
      auto vals = parse_row(lines[li], rhs);
      if (vals.size() != 1) throw ParseError(lines[li].number, "baseMVA expects one value");
      net.base_MVA = vals[0];
      saw_base = true;
      ++li;
      continue;
    }

    const bool is_matrix = rhs.starts_with("[");
    const bool is_cell = rhs.starts_with("{");
    if (!is_matrix && !is_cell) {  // scalar or string assignment (version, ...)
      ++li;
      continue;
    }
    const char closer = is_matrix ? ']' : '}';
    rhs.remove_prefix(1);

    std::vector<std::vector<double>> rows;
    const bool keep = is_matrix && (name == "bus" || name == "branch");
    bool closed = false;
    std::string_view chunk = rhs;
    while (true) {
      const Line& cur = lines[li];
      if (auto pos = chunk.find(closer); pos != std::string_view::npos) {
        chunk = strip(chunk.substr(0, pos));
        if (keep && !chunk.empty()) rows.push_back(parse_row(cur, chunk));
        closed = true;
        ++li;
        break;
      }
      if (keep && !chunk.empty()) rows.push_back(parse_row(cur, chunk));
      ++li;
      if (li >= lines.size()) break;
      chunk = strip(lines[li].text);
    }
    if (!closed)
      throw ParseError(static_cast<int>(lines.size()), "unterminated table mpc." + std::string(name));

    if (name == "bus") {
      for (const auto& row : rows) {
        if (row.size() < 9)
          throw ParseError(0, "bus row needs at least 9 columns, got " +
                                  std::to_string(row.size()));
        BusRecord b;
        b.id = static_cast<int>(row[0]);
        b.Gs = field(row, 5, 0.0);
        b.Bs = field(row, 6, 0.0);
        b.Vm = field(row, 8, 1.0);
        b.Va = field(row, 9, 0.0);
        b.base_kV = field(row, 10, 0.0);
        if (net.id_to_index.count(b.id))
          throw ValidationError("duplicate bus id " + std::to_string(b.id));
        net.id_to_index[b.id] = static_cast<int>(net.buses.size());
        net.buses.push_back(b);
      }
      saw_bus = true;
    } else if (name == "branch") {
      for (const auto& row : rows) {
        if (row.size() < 11)
          throw ParseError(0, "branch row needs at least 11 columns, got " +
                                  std::to_string(row.size()));
        if (field(row, 11, 1.0) == 0.0) continue;  // out of service
        BranchRecord br;
        br.from_bus = static_cast<int>(row[0]);
        br.to_bus = static_cast<int>(row[1]);
        br.r = row[2];
        br.x = row[3];
        br.b = row[4];
        double ratio = field(row, 9, 0.0);
        br.tau = ratio == 0.0 ? 1.0 : ratio;
        br.shift_deg = field(row, 10, 0.0);
        net.branches.push_back(br);
      }
      saw_branch = true;
    }
  }

  if (!saw_base) throw ParseError(0, "case defines no baseMVA");
  if (!saw_bus) throw ParseError(0, "case defines no bus table");
  if (!saw_branch) throw ParseError(0, "case defines no branch table");

  for (auto& br : net.branches) {
    auto f = net.id_to_index.find(br.from_bus);
    auto t = net.id_to_index.find(br.to_bus);
    if (f == net.id_to_index.end() || t == net.id_to_index.end())
      throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + " references a missing bus");
    br.from_idx = f->second;
    br.to_idx = t->second;
  }
  net.validate();
  return net;
}

Network parse_case_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open case file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

Admittances build_admittances(const Network& net) {
  const int n = net.n();
  const int l = net.l();
  std::vector<Triplet> tf, tt, tb;
  tf.reserve(2 * l);
  tt.reserve(2 * l);
  tb.reserve(4 * l + n);

  for (int k = 0; k < l; ++k) {
    const auto& br = net.branches[k];
    const cplx ys = 1.0 / cplx(br.r, br.x);
    const cplx ych(0.0, br.b / 2.0);
    const cplx t = std::polar(br.tau, br.shift_deg * kDegToRad);
    const cplx y_ff = (ys + ych) / (t * std::conj(t));
    const cplx y_ft = -ys / std::conj(t);
    const cplx y_tf = -ys / t;
    const cplx y_tt = ys + ych;
    const int a = br.from_idx, b = br.to_idx;
    tf.push_back({k, a, y_ff});
    tf.push_back({k, b, y_ft});
    tt.push_back({k, a, y_tf});
    tt.push_back({k, b, y_tt});
    // Df^T Yf contribution lands on row alpha(k), Dt^T Yt on row beta(k).
    tb.push_back({a, a, y_ff});
    tb.push_back({a, b, y_ft});
    tb.push_back({b, a, y_tf});
    tb.push_back({b, b, y_tt});
  }
  for (int i = 0; i < n; ++i) {
    const auto& bus = net.buses[i];
    if (bus.Gs != 0.0 || bus.Bs != 0.0)
      tb.push_back({i, i, cplx(bus.Gs, bus.Bs) / net.base_MVA});
  }

  Admittances adm;
  adm.Yf = SparseComplex::from_triplets(l, n, std::move(tf));
  adm.Yt = SparseComplex::from_triplets(l, n, std::move(tt));
  adm.Ybus = SparseComplex::from_triplets(n, n, std::move(tb));
  return adm;
}

}  // namespace psync
