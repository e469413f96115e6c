#include "dgm/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "dgm/error.hpp"

namespace dgm {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kRenormalizeWindow = 1e-9;
constexpr double kExactWindow = 1e-12;

std::string where(const PlayerSpec& p, std::size_t i) {
  return "players[" + std::to_string(i) + "] (" + p.name + ")";
}

}  // namespace

Environment::Environment(std::vector<std::string> actions, std::vector<PlayerSpec> players,
                         double discount)
    : actions_(std::move(actions)), players_(std::move(players)), discount_(discount) {
  if (!std::isfinite(discount_) || discount_ < 0.0 || discount_ >= 1.0)
    throw InputError("discount: must satisfy 0 <= discount < 1, got " + std::to_string(discount_));
  if (actions_.empty()) throw InputError("actions: at least one action is required");
  {
    std::set<std::string> seen;
    for (std::size_t a = 0; a < actions_.size(); ++a) {
      if (actions_[a].empty()) throw InputError("actions[" + std::to_string(a) + "]: empty label");
      if (!seen.insert(actions_[a]).second)
        throw InputError("actions[" + std::to_string(a) + "]: duplicate label '" + actions_[a] + "'");
    }
  }

  std::set<std::string> names;
  std::vector<std::size_t> radices;
  const auto num_actions = static_cast<Eigen::Index>(actions_.size());
  for (std::size_t i = 0; i < players_.size(); ++i) {
    PlayerSpec& p = players_[i];
    const std::string at = where(p, i);
    if (p.name.empty()) throw InputError("players[" + std::to_string(i) + "].name: empty");
    if (!names.insert(p.name).second) throw InputError(at + ".name: duplicate player name");
    if (p.types.empty()) throw InputError(at + ".types: at least one type is required");
    std::set<std::string> type_seen;
    for (const auto& t : p.types) {
      if (t.empty() || t.find(',') != std::string::npos)
        throw InputError(at + ".types: label '" + t + "' is empty or contains ','");
      if (!type_seen.insert(t).second) throw InputError(at + ".types: duplicate label '" + t + "'");
    }
    const auto m = static_cast<Eigen::Index>(p.types.size());
    if (p.valuation.rows() != m || p.valuation.cols() != num_actions)
      throw InputError(at + ".valuation: expected a table over every type and action");
    for (Eigen::Index t = 0; t < m; ++t)
      for (Eigen::Index a = 0; a < num_actions; ++a) {
        const double v = p.valuation(t, a);
        if (!std::isfinite(v))
          throw InputError(at + ".valuation." + p.types[t] + "." + actions_[a] + ": not finite");
        bound_ = std::max(bound_, std::abs(v));
      }
    if (p.transition.size() != actions_.size())
      throw InputError(at + ".transition: expected one kernel per action");
    for (std::size_t a = 0; a < actions_.size(); ++a) {
      Eigen::MatrixXd& k = p.transition[a];
      if (k.rows() != m || k.cols() != m)
        throw InputError(at + ".transition: ragged kernel for action " + actions_[a]);
      for (Eigen::Index t = 0; t < m; ++t) {
        const std::string row = at + ".transition." + p.types[t] + "." + actions_[a];
        double sum = 0.0;
        for (Eigen::Index u = 0; u < m; ++u) {
          const double q = k(t, u);
          if (!std::isfinite(q) || q < 0.0)
            throw InputError(row + "[" + std::to_string(u) + "]: negative or non-finite probability");
          sum += q;
        }
        if (std::abs(sum - 1.0) > kRenormalizeWindow) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.12g", sum);
          throw InputError(row + ": row sums to " + buf + ", not 1");
        }
        if (std::abs(sum - 1.0) > kExactWindow) k.row(t) /= sum;
      }
    }
    radices.push_back(p.types.size());
  }
  space_ = StateSpace(std::move(radices));
}

double Environment::welfare(std::size_t state, std::size_t action) const {
  double s = 0.0;
  for (std::size_t j = 0; j < players_.size(); ++j)
    s += valuation(j, space_.component(state, j), action);
  return s;
}

double Environment::others_welfare(std::size_t state, std::size_t excluded,
                                   std::size_t action) const {
  double s = 0.0;
  for (std::size_t j = 0; j < players_.size(); ++j)
    if (j != excluded) s += valuation(j, space_.component(state, j), action);
  return s;
}

std::vector<std::pair<std::size_t, double>> Environment::joint_row(std::size_t state,
                                                                   std::size_t action) const {
  std::vector<std::pair<std::size_t, double>> row{{0, 1.0}};
  std::vector<std::pair<std::size_t, double>> next;
  for (std::size_t j = 0; j < players_.size(); ++j) {
    const std::size_t t = space_.component(state, j);
    const std::size_t m = players_[j].types.size();
    next.clear();
    for (const auto& [idx, prob] : row)
      for (std::size_t u = 0; u < m; ++u) {
        const double q = kernel(j, t, action, u);
        if (q > 0.0) next.emplace_back(idx * m + u, prob * q);
      }
    row.swap(next);
  }
  return row;
}

SparseKernel Environment::joint_kernel(std::size_t action) const {
  const auto n = static_cast<Eigen::Index>(num_states());
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t s = 0; s < num_states(); ++s)
    for (const auto& [next, prob] : joint_row(s, action))
      entries.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(next), prob);
  SparseKernel k(n, n);
  k.setFromTriplets(entries.begin(), entries.end());
  return k;
}

double Environment::expect(std::size_t state, std::size_t action, const Eigen::VectorXd& f) const {
  double s = 0.0;
  for (const auto& [next, prob] : joint_row(state, action))
    s += prob * f(static_cast<Eigen::Index>(next));
  return s;
}

std::optional<std::size_t> Environment::find_player(std::string_view name) const {
  for (std::size_t i = 0; i < players_.size(); ++i)
    if (players_[i].name == name) return i;
  return std::nullopt;
}

std::optional<std::size_t> Environment::find_action(std::string_view label) const {
  for (std::size_t a = 0; a < actions_.size(); ++a)
    if (actions_[a] == label) return a;
  return std::nullopt;
}

std::optional<std::size_t> Environment::find_type(std::size_t player, std::string_view label) const {
  const auto& types = players_.at(player).types;
  for (std::size_t t = 0; t < types.size(); ++t)
    if (types[t] == label) return t;
  return std::nullopt;
}

std::vector<std::string> Environment::state_labels(std::size_t state) const {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < players_.size(); ++j)
    out.push_back(players_[j].types[space_.component(state, j)]);
  return out;
}

std::string Environment::state_label(std::size_t state) const {
  std::string out;
  for (std::size_t j = 0; j < players_.size(); ++j) {
    if (j) out += ',';
    out += players_[j].types[space_.component(state, j)];
  }
  return out;
}

std::size_t Environment::parse_state(std::string_view label) const {
  std::vector<std::size_t> profile;
  if (!players_.empty()) {
    std::size_t start = 0;
    for (std::size_t j = 0; j < players_.size(); ++j) {
      const std::size_t end = label.find(',', start);
      const bool last = j + 1 == players_.size();
      if (last != (end == std::string_view::npos))
        throw InputError("state '" + std::string(label) + "': expected " +
                         std::to_string(players_.size()) + " comma-separated types");
      const auto piece = label.substr(start, last ? std::string_view::npos : end - start);
      const auto t = find_type(j, piece);
      if (!t)
        throw InputError("state '" + std::string(label) + "': unknown type '" + std::string(piece) +
                         "' for player " + players_[j].name);
      profile.push_back(*t);
      start = end + 1;
    }
  } else if (!label.empty()) {
    throw InputError("state '" + std::string(label) + "': environment has no players");
  }
  return space_.encode(profile);
}

// ---------------------------------------------------------------------------
// Document format

namespace {

double number_at(const ordered_json& j, const std::string& path) {
  if (!j.is_number()) throw InputError(path + ": expected a number");
  return j.get<double>();
}

const ordered_json& member(const ordered_json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw InputError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw InputError(path + "." + key + ": missing");
  return *it;
}

std::vector<std::string> string_list(const ordered_json& j, const std::string& path) {
  if (!j.is_array()) throw InputError(path + ": expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_string()) throw InputError(path + "[" + std::to_string(k) + "]: expected a string");
    out.push_back(j[k].get<std::string>());
  }
  return out;
}

}  // namespace

Environment load_environment(std::string_view document) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("parse error: ") + e.what());
  }
  const double discount = number_at(member(doc, "discount", "document"), "discount");
  const auto actions = string_list(member(doc, "actions", "document"), "actions");
  const auto& players_json = member(doc, "players", "document");
  if (!players_json.is_array()) throw InputError("players: expected an array");

  std::vector<PlayerSpec> players;
  for (std::size_t i = 0; i < players_json.size(); ++i) {
    const std::string at = "players[" + std::to_string(i) + "]";
    const auto& pj = players_json[i];
    PlayerSpec p;
    const auto& name = member(pj, "name", at);
    if (!name.is_string()) throw InputError(at + ".name: expected a string");
    p.name = name.get<std::string>();
    p.types = string_list(member(pj, "types", at), at + ".types");
    const auto m = static_cast<Eigen::Index>(p.types.size());
    const auto na = static_cast<Eigen::Index>(actions.size());

    const auto& vj = member(pj, "valuation", at);
    if (!vj.is_object()) throw InputError(at + ".valuation: expected an object");
    if (vj.size() != p.types.size())
      throw InputError(at + ".valuation: expected exactly one entry per type");
    p.valuation = Eigen::MatrixXd::Zero(m, na);
    for (Eigen::Index t = 0; t < m; ++t) {
      const std::string tp = at + ".valuation." + p.types[t];
      const auto& row = member(vj, p.types[t].c_str(), at + ".valuation");
      if (!row.is_object() || row.size() != actions.size())
        throw InputError(tp + ": expected one number per action");
      for (Eigen::Index a = 0; a < na; ++a)
        p.valuation(t, a) = number_at(member(row, actions[a].c_str(), tp), tp + "." + actions[a]);
    }

    const auto& tj = member(pj, "transition", at);
    if (!tj.is_object()) throw InputError(at + ".transition: expected an object");
    if (tj.size() != p.types.size())
      throw InputError(at + ".transition: expected exactly one entry per type");
    p.transition.assign(actions.size(), Eigen::MatrixXd::Zero(m, m));
    for (Eigen::Index t = 0; t < m; ++t) {
      const std::string tp = at + ".transition." + p.types[t];
      const auto& row = member(tj, p.types[t].c_str(), at + ".transition");
      if (!row.is_object() || row.size() != actions.size())
        throw InputError(tp + ": expected one probability row per action");
      for (Eigen::Index a = 0; a < na; ++a) {
        const std::string ap = tp + "." + actions[a];
        const auto& probs = member(row, actions[a].c_str(), tp);
        if (!probs.is_array() || probs.size() != p.types.size())
          throw InputError(ap + ": expected " + std::to_string(m) + " probabilities (ragged row)");
        for (Eigen::Index u = 0; u < m; ++u)
          p.transition[a](t, u) = number_at(probs[u], ap + "[" + std::to_string(u) + "]");
      }
    }
    players.push_back(std::move(p));
  }
  return Environment(actions, std::move(players), discount);
}

Environment load_environment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return load_environment(ss.str());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string serialize_environment(const Environment& env) {
  ordered_json doc;
  doc["discount"] = env.discount();
  doc["actions"] = env.actions();
  doc["players"] = ordered_json::array();
  for (const auto& p : env.players()) {
    ordered_json pj;
    pj["name"] = p.name;
    pj["types"] = p.types;
    ordered_json val = ordered_json::object();
    ordered_json tr = ordered_json::object();
    for (std::size_t t = 0; t < p.types.size(); ++t) {
      ordered_json vrow = ordered_json::object();
      ordered_json trow = ordered_json::object();
      for (std::size_t a = 0; a < env.num_actions(); ++a) {
        vrow[env.actions()[a]] = p.valuation(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a));
        std::vector<double> probs(p.types.size());
        for (std::size_t u = 0; u < p.types.size(); ++u)
          probs[u] = p.transition[a](static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(u));
        trow[env.actions()[a]] = probs;
      }
      val[p.types[t]] = vrow;
      tr[p.types[t]] = trow;
    }
    pj["valuation"] = val;
    pj["transition"] = tr;
    doc["players"].push_back(pj);
  }
  return doc.dump(2);
}

std::string environment_digest(const Environment& env) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_environment(env)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Environment reduced_environment(const Environment& env, std::size_t excluded) {
  if (excluded >= env.num_players()) throw std::out_of_range("reduced_environment: player index");
  std::vector<PlayerSpec> rest;
  for (std::size_t j = 0; j < env.num_players(); ++j)
    if (j != excluded) rest.push_back(env.player(j));
  return Environment(env.actions(), std::move(rest), env.discount());
}

// ---------------------------------------------------------------------------
// Noise and coupling

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

double NoiseStream::uniform(std::uint64_t path, std::uint64_t player, std::uint64_t period,
                            std::uint64_t component) const {
  std::uint64_t h = splitmix(seed_);
  h = splitmix(h ^ path);
  h = splitmix(h ^ player);
  h = splitmix(h ^ period);
  h = splitmix(h ^ component);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::vector<double> cumulative(std::span<const double> row) {
  std::vector<double> cdf(row.size());
  double s = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    s += row[k];
    cdf[k] = s;
  }
  if (!cdf.empty()) {
    // Pin the tail of the support to 1 so every u in [0,1) lands somewhere.
    std::size_t last = cdf.size();
    while (last > 0 && row[last - 1] <= 0.0) --last;
    for (std::size_t k = last == 0 ? 0 : last - 1; k < cdf.size(); ++k) cdf[k] = 1.0;
  }
  return cdf;
}

std::size_t inverse_cdf(std::span<const double> cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return cdf.size() - 1;
  return static_cast<std::size_t>(it - cdf.begin());
}

Eigen::MatrixXd couple_rows(std::span<const double> row_x, std::span<const double> row_y) {
  const auto cx = cumulative(row_x);
  const auto cy = cumulative(row_y);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cx.size()),
                                            static_cast<Eigen::Index>(cy.size()));
  for (std::size_t a = 0; a < cx.size(); ++a) {
    const double lo_x = a == 0 ? 0.0 : cx[a - 1];
    if (cx[a] <= lo_x) continue;
    for (std::size_t b = 0; b < cy.size(); ++b) {
      const double lo_y = b == 0 ? 0.0 : cy[b - 1];
      const double overlap = std::min(cx[a], cy[b]) - std::max(lo_x, lo_y);
      if (overlap > 0.0) q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = overlap;
    }
  }
  return q;
}

CoupledKernel coupling_kernel(const Environment& env, std::size_t player, std::size_t action) {
  if (player >= env.num_players() || action >= env.num_actions())
    throw std::out_of_range("coupling_kernel: player or action index");
  const std::size_t m = env.num_types(player);
  const Eigen::MatrixXd& k = env.player(player).transition[action];
  CoupledKernel out{player, action, m, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m * m),
                                                             static_cast<Eigen::Index>(m * m))};
  std::vector<std::vector<double>> rows(m, std::vector<double>(m));
  for (std::size_t t = 0; t < m; ++t)
    for (std::size_t u = 0; u < m; ++u)
      rows[t][u] = k(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(u));
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < m; ++y) {
      const Eigen::MatrixXd q = couple_rows(rows[x], rows[y]);
      for (std::size_t nx = 0; nx < m; ++nx)
        for (std::size_t ny = 0; ny < m; ++ny)
          out.probability(static_cast<Eigen::Index>(x * m + y), static_cast<Eigen::Index>(nx * m + ny)) =
              q(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(ny));
    }
  return out;
}

KernelSampler::KernelSampler(const Environment& env) {
  cdf_.resize(env.num_players());
  for (std::size_t j = 0; j < env.num_players(); ++j) {
    const std::size_t m = env.num_types(j);
    cdf_[j].resize(env.num_actions());
    for (std::size_t a = 0; a < env.num_actions(); ++a) {
      cdf_[j][a].resize(m);
      for (std::size_t t = 0; t < m; ++t) {
        std::vector<double> row(m);
        for (std::size_t u = 0; u < m; ++u) row[u] = env.kernel(j, t, a, u);
        cdf_[j][a][t] = cumulative(row);
      }
    }
  }
}

std::size_t KernelSampler::next(std::size_t player, std::size_t type, std::size_t action,
                                double u) const {
  return inverse_cdf(cdf_[player][action][type], u);
}

}  // namespace dgm
