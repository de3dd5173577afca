#include "psync/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "psync/errors.hpp"

namespace psync {

namespace {

bool is_bus_kind(MeasKind k) {
  return k == MeasKind::VmSq || k == MeasKind::BusPQ || k == MeasKind::Phasor;
}

void check_index(const Network& net, MeasurementKind mk) {
  const int limit = is_bus_kind(mk.kind) ? net.n() : net.l();
  if (mk.index < 0 || mk.index >= limit)
    throw std::out_of_range("measurement index " + std::to_string(mk.index) +
                            " out of range (limit " + std::to_string(limit) + ")");
}

}  // namespace

void MeasurementSet::add(Measurement m) {
  check_index(*net_, m.kind);
  if (m.weight < 0.0) throw ValidationError("measurement weight must be nonnegative");
  for (const auto& e : ms_)
    if (e.kind.kind == m.kind.kind && e.kind.index == m.kind.index)
      throw ValidationError("duplicate measurement for kind/index " +
                            std::to_string(m.kind.index));
  ms_.push_back(m);
}

cplx evaluate(const Network& net, const Admittances& adm, std::span<const cplx> v,
              MeasurementKind mk) {
  if (static_cast<int>(v.size()) != net.n())
    throw std::invalid_argument("evaluate: |v| != n");
  check_index(net, mk);
  switch (mk.kind) {
    case MeasKind::VmSq:
      return {std::norm(v[mk.index]), 0.0};
    case MeasKind::Phasor:
      return v[mk.index];
    case MeasKind::BusPQ: {
      std::vector<cplx> i = adm.Ybus * v;
      return v[mk.index] * std::conj(i[mk.index]);
    }
    case MeasKind::BranchPQFrom: {
      std::vector<cplx> i = adm.Yf * v;
      return v[net.from_index(mk.index)] * std::conj(i[mk.index]);
    }
    case MeasKind::BranchPQTo: {
      std::vector<cplx> i = adm.Yt * v;
      return v[net.to_index(mk.index)] * std::conj(i[mk.index]);
    }
  }
  throw std::logic_error("unreachable");
}

SparseHermitian hermitian_A(const Network& net, const Admittances& adm,
                            MeasurementKind mk, ScalarPart part) {
  check_index(net, mk);
  if (mk.kind == MeasKind::Phasor)
    throw std::invalid_argument("hermitian_A: phasor measurements are linear, not quadratic");

  const int n = net.n();
  std::vector<Triplet> tr;
  if (mk.kind == MeasKind::VmSq) {
    tr.push_back({mk.index, mk.index, 1.0});
    return SparseHermitian::from_triplets(n, std::move(tr));
  }

  // M = Y^H e_k e_col^T has one nonzero column `col`; M(i,col) = conj(Y(k,i)).
  const SparseComplex* Y = nullptr;
  int col = 0;
  if (mk.kind == MeasKind::BusPQ) {
    Y = &adm.Ybus;
    col = mk.index;
  } else if (mk.kind == MeasKind::BranchPQFrom) {
    Y = &adm.Yf;
    col = net.from_index(mk.index);
  } else {
    Y = &adm.Yt;
    col = net.to_index(mk.index);
  }
  const int k = mk.index;
  auto cp = Y->col_ptr();
  auto ri = Y->row_ind();
  auto va = Y->values();
  const cplx half(0.5, 0.0);
  const cplx halfj(0.0, -0.5);  // 1/(2j)
  for (int c = 0; c < Y->cols(); ++c) {
    for (int p = cp[c]; p < cp[c + 1]; ++p) {
      if (ri[p] != k) continue;
      const cplx m = std::conj(va[p]);  // M(c, col)
      if (part == ScalarPart::Re) {     // (M + M^H)/2
        if (c == col) {
          tr.push_back({c, col, m.real()});
        } else {
          tr.push_back({c, col, m * half});
          tr.push_back({col, c, std::conj(m) * half});
        }
      } else {  // (M - M^H)/(2j)
        if (c == col) {
          tr.push_back({c, col, m.imag()});
        } else {
          tr.push_back({c, col, m * halfj});
          tr.push_back({col, c, -std::conj(m) * halfj});
        }
      }
    }
  }
  return SparseHermitian::from_triplets(n, std::move(tr));
}

MeasurementSet simulate(const Network& net, const Admittances& adm,
                        std::span<const cplx> v_gnd, std::span<const MeasurementKind> plan,
                        double sigma_noise, uint64_t seed, WeightRule weights) {
  if (sigma_noise < 0.0) throw std::invalid_argument("simulate: sigma_noise < 0");
  if (weights == WeightRule::InverseVariance && sigma_noise == 0.0)
    throw std::invalid_argument("simulate: inverse-variance weights need sigma > 0");

  std::vector<cplx> i_bus = adm.Ybus * v_gnd;
  std::vector<cplx> i_f = adm.Yf * v_gnd;
  std::vector<cplx> i_t = adm.Yt * v_gnd;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&]() { return sigma_noise == 0.0 ? 0.0 : sigma_noise * gauss(rng); };

  MeasurementSet set(net);
  set.rng_seed = seed;
  const double w =
      weights == WeightRule::Unit ? 1.0 : 1.0 / (sigma_noise * sigma_noise);
  for (const auto& mk : plan) {
    check_index(net, mk);
    Measurement m;
    m.kind = mk;
    m.weight = w;
    m.sigma = sigma_noise;
    switch (mk.kind) {
      case MeasKind::VmSq:
        m.value = {std::norm(v_gnd[mk.index]) + draw(), 0.0};
        break;
      case MeasKind::BusPQ:
        m.value = v_gnd[mk.index] * std::conj(i_bus[mk.index]) + cplx(draw(), draw());
        break;
      case MeasKind::BranchPQFrom:
        m.value = v_gnd[net.from_index(mk.index)] * std::conj(i_f[mk.index]) +
                  cplx(draw(), draw());
        break;
      case MeasKind::BranchPQTo:
        m.value = v_gnd[net.to_index(mk.index)] * std::conj(i_t[mk.index]) +
                  cplx(draw(), draw());
        break;
      case MeasKind::Phasor:
        m.value = v_gnd[mk.index] + cplx(draw(), draw());
        break;
    }
    set.add(m);
  }
  return set;
}

double cost(const Network& net, const Admittances& adm, std::span<const cplx> v,
            const MeasurementSet& set) {
  if (static_cast<int>(v.size()) != net.n())
    throw std::invalid_argument("cost: |v| != n");
  std::vector<cplx> i_bus = adm.Ybus * v;
  std::vector<cplx> i_f = adm.Yf * v;
  std::vector<cplx> i_t = adm.Yt * v;

  double total = 0.0;
  for (const auto& m : set.items()) {
    const int k = m.kind.index;
    switch (m.kind.kind) {
      case MeasKind::VmSq: {
        const double r = std::norm(v[k]) - m.value.real();
        total += m.weight * r * r;
        break;
      }
      case MeasKind::BusPQ: {
        const cplx r = v[k] * std::conj(i_bus[k]) - m.value;
        total += m.weight * std::norm(r);
        break;
      }
      case MeasKind::BranchPQFrom: {
        const cplx r = v[net.from_index(k)] * std::conj(i_f[k]) - m.value;
        total += m.weight * std::norm(r);
        break;
      }
      case MeasKind::BranchPQTo: {
        const cplx r = v[net.to_index(k)] * std::conj(i_t[k]) - m.value;
        total += m.weight * std::norm(r);
        break;
      }
      case MeasKind::Phasor: {
        total += m.weight * std::norm(v[k] - m.value);
        break;
      }
    }
  }
  return total;
}

std::vector<MeasurementKind> bus_pqv_plan(const Network& net) {
  std::vector<MeasurementKind> plan;
  plan.reserve(2 * net.n());
  for (int i = 0; i < net.n(); ++i) plan.push_back({MeasKind::VmSq, i});
  for (int i = 0; i < net.n(); ++i) plan.push_back({MeasKind::BusPQ, i});
  return plan;
}

std::vector<MeasurementKind> power_only_plan(const Network& net) {
  std::vector<MeasurementKind> plan;
  plan.reserve(net.n() + 2 * net.l());
  for (int i = 0; i < net.n(); ++i) plan.push_back({MeasKind::BusPQ, i});
  for (int k = 0; k < net.l(); ++k) plan.push_back({MeasKind::BranchPQFrom, k});
  for (int k = 0; k < net.l(); ++k) plan.push_back({MeasKind::BranchPQTo, k});
  return plan;
}

int plan_scalar_count(std::span<const MeasurementKind> plan) {
  int m = 0;
  for (const auto& mk : plan) m += mk.kind == MeasKind::VmSq ? 1 : 2;
  return m;
}

namespace {

using nlohmann::json;

struct TypeInfo {
  MeasKind kind;
  bool split;        // record carries one real scalar of a pair
  ScalarPart part;   // which scalar when split
};

const std::map<std::string, TypeInfo> kTypes = {
    {"vm2", {MeasKind::VmSq, false, ScalarPart::Re}},
    {"bus_pq", {MeasKind::BusPQ, false, ScalarPart::Re}},
    {"branch_pq_from", {MeasKind::BranchPQFrom, false, ScalarPart::Re}},
    {"branch_pq_to", {MeasKind::BranchPQTo, false, ScalarPart::Re}},
    {"phasor", {MeasKind::Phasor, false, ScalarPart::Re}},
    {"bus_p", {MeasKind::BusPQ, true, ScalarPart::Re}},
    {"bus_q", {MeasKind::BusPQ, true, ScalarPart::Im}},
    {"branch_p_from", {MeasKind::BranchPQFrom, true, ScalarPart::Re}},
    {"branch_q_from", {MeasKind::BranchPQFrom, true, ScalarPart::Im}},
    {"branch_p_to", {MeasKind::BranchPQTo, true, ScalarPart::Re}},
    {"branch_q_to", {MeasKind::BranchPQTo, true, ScalarPart::Im}},
};

const char* type_name(MeasKind k) {
  switch (k) {
    case MeasKind::VmSq: return "vm2";
    case MeasKind::BusPQ: return "bus_pq";
    case MeasKind::BranchPQFrom: return "branch_pq_from";
    case MeasKind::BranchPQTo: return "branch_pq_to";
    case MeasKind::Phasor: return "phasor";
  }
  return "?";
}

cplx value_from_json(const json& j) {
  if (j.is_array()) {
    if (j.size() != 2) throw ValidationError("complex value must be [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
  }
  return {j.get<double>(), 0.0};
}

int resolve_index(const Network& net, MeasKind kind, int external) {
  if (is_bus_kind(kind)) return net.index_of(external);
  // Branch kinds address the 1-based position in the in-service branch list.
  if (external < 1 || external > net.l())
    throw ValidationError("branch index " + std::to_string(external) + " out of range");
  return external - 1;
}

}  // namespace

MeasurementSet load_measurements_json(const Network& net, const std::string& json_text) {
  json root = json::parse(json_text);
  if (!root.is_array()) throw ValidationError("measurement file must be a JSON array");

  MeasurementSet set(net);
  // key: (kind, index) of a split pair awaiting its other half
  std::map<std::pair<int, int>, Measurement> pending;
  std::map<std::pair<int, int>, ScalarPart> pending_part;

  for (const auto& rec : root) {
    const std::string type = rec.at("type").get<std::string>();
    auto it = kTypes.find(type);
    if (it == kTypes.end()) throw ValidationError("unknown measurement type '" + type + "'");
    const TypeInfo& info = it->second;

    Measurement m;
    m.kind.kind = info.kind;
    m.kind.index = resolve_index(net, info.kind, rec.at("index").get<int>());
    m.weight = rec.value("weight", 1.0);
    if (rec.contains("sigma")) m.sigma = rec["sigma"].get<double>();

    if (!info.split) {
      m.value = value_from_json(rec.at("value"));
      set.add(m);
      continue;
    }

    const double scalar = rec.at("value").get<double>();
    auto key = std::make_pair(static_cast<int>(info.kind), m.kind.index);
    auto p = pending.find(key);
    if (p == pending.end()) {
      m.value = info.part == ScalarPart::Re ? cplx(scalar, 0.0) : cplx(0.0, scalar);
      pending[key] = m;
      pending_part[key] = info.part;
      continue;
    }
    if (pending_part[key] == info.part)
      throw ValidationError("duplicate split record for type '" + type + "'");
    Measurement merged = p->second;
    const double wa = merged.weight, wb = m.weight;
    if (std::abs(wa - wb) > 1e-9 * std::max({std::abs(wa), std::abs(wb), 1e-300}))
      throw ValidationError("split P/Q records for index " + std::to_string(rec.at("index").get<int>()) +
                            " carry unequal weights (" + std::to_string(wa) + " vs " +
                            std::to_string(wb) + ")");
    merged.value += info.part == ScalarPart::Re ? cplx(scalar, 0.0) : cplx(0.0, scalar);
    pending.erase(p);
    pending_part.erase(key);
    set.add(merged);
  }
  if (!pending.empty())
    throw ValidationError("split measurement record without its real/reactive partner");
  return set;
}

std::string save_measurements_json(const MeasurementSet& set) {
  json root = json::array();
  const Network& net = set.net();
  for (const auto& m : set.items()) {
    json rec;
    rec["type"] = type_name(m.kind.kind);
    rec["index"] = is_bus_kind(m.kind.kind) ? net.buses[m.kind.index].id : m.kind.index + 1;
    if (m.kind.kind == MeasKind::VmSq)
      rec["value"] = m.value.real();
    else
      rec["value"] = {m.value.real(), m.value.imag()};
    rec["weight"] = m.weight;
    if (m.sigma) rec["sigma"] = *m.sigma;
    root.push_back(rec);
  }
  return root.dump(2);
}

}  // namespace psync
