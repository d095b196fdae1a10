#include "dsoflex/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace dsoflex {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(std::string("cannot open ") + what + " file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(origin + ": " + e.what());
    }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw Error(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw Error(where + ": unknown field '" + it.key() + "'");
}

const json& need(const json& j, const std::string& key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) throw Error(where + ": missing field '" + key + "'");
    return *it;
}

double num(const json& j, const std::string& key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number()) throw Error(where + "." + key + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw Error(where + "." + key + ": not finite");
    return d;
}

int integer(const json& j, const std::string& key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number_integer()) throw Error(where + "." + key + ": expected an integer");
    return v.get<int>();
}

double num_or(const json& j, const std::string& key, double fallback, const std::string& where) {
    return j.contains(key) ? num(j, key, where) : fallback;
}

/// A profile given as a scalar, an array of length T, or the name of a shared profile.
Profile profile(const json& j, const std::string& key, const std::map<std::string, Profile>& shared,
                const TimeGrid& time, const std::string& where) {
    const json& v = need(j, key, where);
    const std::string at = where + "." + key;
    if (v.is_number()) return Profile::Constant(time.T, v.get<double>());
    if (v.is_string()) {
        const auto it = shared.find(v.get<std::string>());
        if (it == shared.end()) throw Error(at + ": unknown profile '" + v.get<std::string>() + "'");
        return it->second;
    }
    if (v.is_array()) {
        if (static_cast<int>(v.size()) != time.T)
            throw Error(at + ": expected " + std::to_string(time.T) + " values, got " + std::to_string(v.size()));
        Profile p(time.T);
        for (int t = 0; t < time.T; ++t) {
            if (!v[t].is_number()) throw Error(at + "[" + std::to_string(t) + "]: expected a number");
            p(t) = v[t].get<double>();
        }
        return p;
    }
    throw Error(at + ": expected a number, array or profile name");
}

void check_time(const json& doc, const TimeGrid& time, const std::string& origin) {
    if (integer(doc, "T", origin) != time.T)
        throw Error(origin + ": T = " + std::to_string(doc["T"].get<int>()) + " differs from the scenario's " +
                    std::to_string(time.T));
    if (std::abs(num(doc, "dt_h", origin) - time.dt) > 1e-12)
        throw Error(origin + ": dt_h differs from the scenario's");
}

DerSpec parse_der(const json& r, const std::map<std::string, Profile>& shared, const TimeGrid& time,
                  const std::string& where, Warnings* warnings) {
    const std::string kind = need(r, "kind", where).get<std::string>();
    switch (der_kind_from_string(kind)) {
        case DerKind::EV: {
            check_keys(r, {"kind", "id", "capacity_kwh", "p_rated_kw", "arrive_slot", "depart_slot",
                           "e_expected_kwh", "e_min_kwh", "comp_departure_eur_per_kwh", "comp_interim"},
                       where);
            EvParams ev;
            ev.capacity_kwh = num(r, "capacity_kwh", where);
            ev.p_rated_kw = num(r, "p_rated_kw", where);
            ev.arrive_slot = integer(r, "arrive_slot", where);
            ev.depart_slot = integer(r, "depart_slot", where);
            ev.e_expected_kwh = num(r, "e_expected_kwh", where);
            ev.e_min_kwh = num(r, "e_min_kwh", where);
            ev.comp_departure = num_or(r, "comp_departure_eur_per_kwh", 0.0, where);
            if (r.contains("comp_interim")) {
                int k = 0;
                for (const json& c : r["comp_interim"]) {
                    const std::string at = where + ".comp_interim[" + std::to_string(k++) + "]";
                    check_keys(c, {"checkpoint", "eur_per_kwh"}, at);
                    ev.comp_interim.emplace_back(integer(c, "checkpoint", at), num(c, "eur_per_kwh", at));
                }
            }
            return build_ev_spec(ev, time);
        }
        case DerKind::BESS: {
            check_keys(r, {"kind", "id", "capacity_kwh", "p_ch_max_kw", "p_dis_max_kw", "e0_kwh",
                           "balance_checkpoints", "comp_up_eur_per_kwh", "comp_dn_eur_per_kwh",
                           "terminal_comp_up_eur_per_kwh", "terminal_comp_dn_eur_per_kwh", "hard_terminal"},
                       where);
            BessParams b;
            b.capacity_kwh = num(r, "capacity_kwh", where);
            b.p_ch_max_kw = num(r, "p_ch_max_kw", where);
            b.p_dis_max_kw = num(r, "p_dis_max_kw", where);
            b.e0_kwh = num(r, "e0_kwh", where);
            if (r.contains("balance_checkpoints"))
                for (const json& k : r["balance_checkpoints"]) b.balance_slots.push_back(k.get<int>());
            b.comp_up = num_or(r, "comp_up_eur_per_kwh", 0.0, where);
            b.comp_dn = num_or(r, "comp_dn_eur_per_kwh", 0.0, where);
            if (r.contains("terminal_comp_up_eur_per_kwh"))
                b.terminal_comp_up = num(r, "terminal_comp_up_eur_per_kwh", where);
            if (r.contains("terminal_comp_dn_eur_per_kwh"))
                b.terminal_comp_dn = num(r, "terminal_comp_dn_eur_per_kwh", where);
            b.hard_terminal = r.value("hard_terminal", false);
            return build_bess_spec(b, time, warnings);
        }
        case DerKind::HP: {
            check_keys(r, {"kind", "id", "capacitance_kwh_per_k", "conductance_kw_per_k", "cop", "theta0_k",
                           "theta_amb_k", "theta_set_k", "rho_up_eur_per_k", "rho_dn_eur_per_k",
                           "dtheta_up_max_k", "dtheta_dn_max_k", "p_max_kw"},
                       where);
            HpThermalSpec hp;
            hp.capacitance = num(r, "capacitance_kwh_per_k", where);
            hp.conductance = num(r, "conductance_kw_per_k", where);
            hp.cop = num(r, "cop", where);
            hp.theta0 = num(r, "theta0_k", where);
            hp.theta_amb = profile(r, "theta_amb_k", shared, time, where);
            hp.theta_set = profile(r, "theta_set_k", shared, time, where);
            hp.rho_up = profile(r, "rho_up_eur_per_k", shared, time, where);
            hp.rho_dn = profile(r, "rho_dn_eur_per_k", shared, time, where);
            hp.dtheta_up_max = profile(r, "dtheta_up_max_k", shared, time, where);
            hp.dtheta_dn_max = profile(r, "dtheta_dn_max_k", shared, time, where);
            return build_hp_spec(hp, num(r, "p_max_kw", where), time, warnings);
        }
        case DerKind::PV_CURTAILABLE: {
            check_keys(r, {"kind", "id", "p_base_kw", "p_lo_kw", "p_hi_kw", "c_p_up_eur_per_kw",
                           "c_p_dn_eur_per_kw"},
                       where);
            return make_curtailable_spec(profile(r, "p_base_kw", shared, time, where),
                                         profile(r, "p_lo_kw", shared, time, where),
                                         profile(r, "p_hi_kw", shared, time, where),
                                         profile(r, "c_p_up_eur_per_kw", shared, time, where),
                                         profile(r, "c_p_dn_eur_per_kw", shared, time, where), time);
        }
    }
    throw Error(where + ": unsupported kind");
}

std::string resolve(const std::string& base_file, const std::string& ref) {
    const fs::path p(ref);
    if (p.is_absolute()) return ref;
    return (fs::path(base_file).parent_path() / p).lexically_normal().string();
}

}  // namespace

Fleet parse_fleet(const std::string& text, const TimeGrid& time, const std::string& origin,
                  Warnings* warnings) {
    const json doc = parse_json(text, origin);
    check_keys(doc, {"T", "dt_h", "profiles", "ders", "description"}, origin);
    check_time(doc, time, origin);
    std::map<std::string, Profile> shared;
    if (doc.contains("profiles")) {
        const json& ps = doc["profiles"];
        for (auto it = ps.begin(); it != ps.end(); ++it)
            shared[it.key()] = profile(ps, it.key(), {}, time, origin + ".profiles");
    }
    Fleet f;
    const json& ders = need(doc, "ders", origin);
    if (!ders.is_array() || ders.empty()) throw Error(origin + ": 'ders' must be a nonempty array");
    for (std::size_t k = 0; k < ders.size(); ++k) {
        const json& r = ders[k];
        const std::string label = r.contains("id") ? r["id"].get<std::string>() : "der" + std::to_string(k);
        const std::string where = origin + ": ders[" + std::to_string(k) + "] (" + label + ")";
        Warnings local;
        try {
            f.ders.push_back(parse_der(r, shared, time, where, &local));
        } catch (const json::exception& e) {
            throw Error(where + ": " + e.what());
        } catch (const Error& e) {
            const std::string msg = e.what();
            throw Error(msg.rfind(origin, 0) == 0 ? msg : where + ": " + msg);
        }
        if (warnings)
            for (const std::string& w : local) warnings->push_back(where + ": " + w);
        f.labels.push_back(label);
    }
    return f;
}

Fleet load_fleet(const std::string& path, const TimeGrid& time, Warnings* warnings) {
    return parse_fleet(read_file(path, "fleet"), time, path, warnings);
}

TsoPrices load_prices(const std::string& path, const TimeGrid& time, double energy_scale,
                      double reserve_scale) {
    std::istringstream in(read_file(path, "price"));
    std::string line;
    int lineno = 0;
    TsoPrices p{Profile::Zero(time.T), Profile::Zero(time.T), Profile::Zero(time.T)};
    int rows = 0;
    const std::string header = "slot,c_energy_eur_per_mwh,c_ru_eur_per_mw,c_rd_eur_per_mw";
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::string where = path + ":" + std::to_string(lineno);
        if (rows == 0 && line.find_first_not_of("0123456789.,-+eE ") != std::string::npos) {
            if (line != header) throw Error(where + ": expected header '" + header + "'");
            rows = -1;
            continue;
        }
        if (rows == 0) throw Error(where + ": missing header");
        std::vector<double> v;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw Error(where + ": bad number '" + cell + "'");
            }
        }
        if (v.size() != 4) throw Error(where + ": expected 4 columns");
        const int slot = rows < 0 ? 0 : rows;
        if (v[0] != slot) throw Error(where + ": expected slot " + std::to_string(slot));
        if (slot >= time.T) throw Error(where + ": more rows than T");
        p.c_energy(slot) = v[1] * energy_scale;
        p.c_ru(slot) = v[2] * reserve_scale;
        p.c_rd(slot) = v[3] * reserve_scale;
        rows = slot + 1;
    }
    if (rows != time.T) throw Error(path + ": expected " + std::to_string(time.T) + " price rows");
    p.validate(time);
    return p;
}

Scenario load_scenario(const std::string& path) {
    const json doc = parse_json(read_file(path, "scenario"), path);
    const std::string& o = path;
    check_keys(doc, {"name", "description", "T", "dt_h", "grid", "prices", "price_scale", "aggregators",
                     "voltage_overrides", "options"},
               o);
    Scenario s;
    try {
        s.path = path;
        s.name = doc.value("name", fs::path(path).stem().string());
        s.time.T = integer(doc, "T", o);
        s.time.dt = num(doc, "dt_h", o);
        s.time.validate();
        s.grid = resolve(path, need(doc, "grid", o).get<std::string>());
        s.prices = resolve(path, need(doc, "prices", o).get<std::string>());
        if (doc.contains("price_scale")) {
            const json& ps = doc["price_scale"];
            check_keys(ps, {"energy", "reserve"}, o + ".price_scale");
            s.energy_price_scale = num(ps, "energy", o + ".price_scale");
            s.reserve_price_scale = num(ps, "reserve", o + ".price_scale");
        }
        const json& aggs = need(doc, "aggregators", o);
        std::set<std::string> ids;
        for (std::size_t k = 0; k < aggs.size(); ++k) {
            const std::string at = o + ".aggregators[" + std::to_string(k) + "]";
            check_keys(aggs[k], {"id", "node", "fleet", "power_factor"}, at);
            AggregatorEntry a;
            a.id = need(aggs[k], "id", at).get<std::string>();
            a.node = integer(aggs[k], "node", at);
            a.fleet = resolve(path, need(aggs[k], "fleet", at).get<std::string>());
            a.power_factor = num_or(aggs[k], "power_factor", 1.0, at);
            if (!ids.insert(a.id).second) throw Error(at + ": duplicate aggregator id '" + a.id + "'");
            s.aggregators.push_back(a);
        }
        if (doc.contains("voltage_overrides"))
            for (std::size_t k = 0; k < doc["voltage_overrides"].size(); ++k) {
                const json& v = doc["voltage_overrides"][k];
                const std::string at = o + ".voltage_overrides[" + std::to_string(k) + "]";
                check_keys(v, {"node", "v_lo", "v_hi"}, at);
                VoltageOverride vo;
                vo.node = integer(v, "node", at);
                if (v.contains("v_lo")) vo.v_lo = num(v, "v_lo", at);
                if (v.contains("v_hi")) vo.v_hi = num(v, "v_hi", at);
                s.voltage_overrides.push_back(vo);
            }
        if (doc.contains("options")) {
            const json& op = doc["options"];
            const std::string at = o + ".options";
            check_keys(op, {"ignore_voltage", "shrink", "betas", "seed", "random_probes", "single_aggregator"}, at);
            s.options.ignore_voltage = op.value("ignore_voltage", false);
            s.options.shrink = num_or(op, "shrink", 0.0, at);
            if (op.contains("betas")) s.options.betas = op["betas"].get<std::vector<double>>();
            s.options.seed = op.value("seed", std::uint64_t{1});
            s.options.random_probes = op.value("random_probes", 8);
            s.options.single_aggregator = op.value("single_aggregator", std::string());
        }
    } catch (const json::exception& e) {
        throw Error(o + ": " + e.what());
    }
    if (s.aggregators.empty()) throw Error(o + ": no aggregators");
    return s;
}

int PreparedScenario::aggregator_index(const std::string& id) const {
    for (std::size_t h = 0; h < bids.size(); ++h)
        if (bids[h].id == id) return static_cast<int>(h);
    for (std::size_t h = 0; h < scenario.aggregators.size(); ++h)
        if (scenario.aggregators[h].id == id) return static_cast<int>(h);
    throw Error("unknown aggregator '" + id + "'");
}

PreparedScenario prepare(const Scenario& s, bool build_bids) {
    PreparedScenario p;
    p.scenario = s;
    const ScenarioOptions& op = s.options;
    if (!(op.shrink >= 0 && op.shrink <= 1)) throw Error(s.path + ": shrink must lie in [0, 1]");
    for (double b : op.betas)
        if (!(b > 0) || !std::isfinite(b)) throw Error(s.path + ": betas must be finite and positive");
    p.grid = load_grid_file(s.grid, s.time, &p.warnings);
    for (const VoltageOverride& v : s.voltage_overrides) {
        if (v.node <= 0 || v.node >= p.grid.num_nodes)
            throw Error(s.path + ": voltage override at invalid node " + std::to_string(v.node));
        if (v.v_lo) p.grid.v_lo[v.node] = *v.v_lo * *v.v_lo;
        if (v.v_hi) p.grid.v_hi[v.node] = *v.v_hi * *v.v_hi;
        if (!(p.grid.v_lo[v.node] <= p.grid.v_hi[v.node]))
            throw Error(s.path + ": voltage override leaves an empty band at node " + std::to_string(v.node));
    }
    p.prices = load_prices(s.prices, s.time, s.energy_price_scale, s.reserve_price_scale);
    for (const AggregatorEntry& a : s.aggregators) {
        if (a.node < 0 || a.node >= p.grid.num_nodes)
            throw Error(s.path + ": aggregator " + a.id + " sits at unknown node " + std::to_string(a.node));
        p.fleets.push_back(load_fleet(a.fleet, s.time, &p.warnings));
    }
    if (!build_bids) return p;
    for (std::size_t h = 0; h < s.aggregators.size(); ++h) {
        const AggregatorEntry& a = s.aggregators[h];
        InnerOptions io;
        io.seed = op.seed + h;
        io.random_probes = op.random_probes;
        InnerReport rep;
        FlexRegion region = aggregate_inner(p.fleets[h].ders, s.time, op.shrink, &rep, io);
        auto [c_up, c_dn] = estimate_cost_coeffs(p.fleets[h].ders, region, s.time);
        p.bids.push_back(make_bid(a.id, a.node, a.power_factor, std::move(region), c_up, c_dn));
        p.inner.push_back(rep);
        if (rep.shrink > op.shrink)
            p.warnings.push_back("aggregator " + a.id + ": shrink raised to " + fmt(rep.shrink) + " for certification");
    }
    return p;
}

MarketOptions market_options(const Scenario& s) {
    MarketOptions m;
    m.ignore_voltage = s.options.ignore_voltage;
    return m;
}

RunResult run(const PreparedScenario& p) {
    RunResult r;
    r.solution = clear_market(p.grid, p.bids, p.prices, p.scenario.time, market_options(p.scenario));
    if (!r.solution.optimal()) throw Error(p.scenario.path + ": " + r.solution.message);
    r.settlement = settle(r.solution);
    r.kkt = kkt_report(r.solution, p.bids);
    return r;
}

std::vector<SweepRow> sweep_beta(const PreparedScenario& p, SweepMode mode, int single,
                                 const std::vector<double>& betas) {
    if (mode == SweepMode::Single && (single < 0 || single >= static_cast<int>(p.bids.size())))
        throw Error("sweep: aggregator index out of range");
    std::vector<SweepRow> rows;
    for (double beta : betas) {
        SweepRow row;
        row.beta = beta;
        try {
            std::vector<AggregatorBid> bids = p.bids;
            for (std::size_t h = 0; h < bids.size(); ++h)
                if (mode == SweepMode::All || static_cast<int>(h) == single) bids[h] = scale_bid(bids[h], beta);
            const MarketSolution s = clear_market(p.grid, bids, p.prices, p.scenario.time, market_options(p.scenario));
            if (!s.optimal()) {
                row.message = s.message;
            } else {
                row.ok = true;
                row.C_net = s.C_net;
                row.C_Flexibility = s.C_Flexibility;
                if (mode == SweepMode::Single) {
                    const AggregatorResult& a = s.aggregators[single];
                    row.payment = a.payment;
                    row.true_cost = aggregator_cost(p.bids[single], a.ranges);
                    row.profit = row.payment - row.true_cost;
                }
            }
        } catch (const Error& e) {
            row.message = e.what();
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace dsoflex
