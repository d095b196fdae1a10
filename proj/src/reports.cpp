#include "dsoflex/scenario.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace dsoflex {

namespace fs = std::filesystem;

std::string fmt(double v) {
    if (v == 0.0) v = 0.0;  // drop negative zero
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace {

class Csv {
public:
    Csv(const fs::path& path, const std::string& header) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot write " + path.string());
        out_ << header << '\n';
    }
    template <typename... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

private:
    static std::string cell(double v) { return fmt(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }
    std::ofstream out_;
};

const char* kind_name(RowKind k) {
    return k == RowKind::Power ? "POWER" : k == RowKind::Energy ? "ENERGY" : "OTHER";
}

void write_manifest(const fs::path& dir, const nlohmann::ordered_json& m) {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw Error("cannot write manifest in " + dir.string());
    out << m.dump(2) << '\n';
}

nlohmann::ordered_json scenario_header(const PreparedScenario& p) {
    nlohmann::ordered_json m;
    m["scenario"] = p.scenario.name;
    m["scenario_file"] = p.scenario.path;
    m["T"] = p.scenario.time.T;
    m["dt_h"] = fmt(p.scenario.time.dt);
    m["ignore_voltage"] = p.scenario.options.ignore_voltage;
    m["seed"] = p.scenario.options.seed;
    m["shrink_requested"] = fmt(p.scenario.options.shrink);
    nlohmann::ordered_json aggs = nlohmann::ordered_json::array();
    for (std::size_t h = 0; h < p.bids.size(); ++h) {
        nlohmann::ordered_json a;
        a["id"] = p.bids[h].id;
        a["node"] = p.bids[h].node;
        a["ders"] = p.fleets[h].ders.size();
        a["shrink_certified"] = fmt(p.inner[h].shrink);
        a["certification_candidates"] = p.inner[h].iterations;
        a["certification_probes"] = p.inner[h].probes_checked;
        aggs.push_back(a);
    }
    m["aggregators"] = aggs;
    m["warnings"] = p.warnings;
    return m;
}

}  // namespace

void write_run_reports(const PreparedScenario& p, const RunResult& r, const std::string& dir_name) {
    const fs::path dir(dir_name);
    fs::create_directories(dir);
    const MarketSolution& s = r.solution;
    const int T = p.scenario.time.T;

    {
        Csv c(dir / "costs.csv", "quantity,eur");
        c.row("C_Base", s.C_Base);
        c.row("C_Energy", s.C_Energy);
        c.row("R_Capacity", s.R_Capacity);
        c.row("C_Flexibility", s.C_Flexibility);
        c.row("C_net", s.C_net);
    }
    {
        Csv c(dir / "settlement.csv", "quantity,value");
        c.row("sum_payments_eur", r.settlement.sum_payments);
        c.row("lhs_eur", r.settlement.lhs);
        c.row("surplus_eur", r.settlement.surplus);
        c.row("voltage_binding", r.settlement.voltage_binding);
        c.row("max_voltage_dual", r.settlement.max_voltage_dual);
    }
    {
        Csv c(dir / "payments.csv", "aggregator,node,payment_eur,bid_cost_eur,margin_eur");
        for (std::size_t h = 0; h < s.aggregators.size(); ++h) {
            const AggregatorResult& a = s.aggregators[h];
            c.row(a.id, p.bids[h].node, a.payment, a.bid_cost, a.payment - a.bid_cost);
        }
    }
    {
        Csv c(dir / "root_profiles.csv", "slot,P0_base_kw,P0_ref_kw,P0_ru_kw,P0_rd_kw,R_up_kw,R_dn_kw");
        for (int t = 0; t < T; ++t)
            c.row(t, s.P0_base(t), s.P0_ref(t), s.P0_ru(t), s.P0_rd(t), s.R_up(t), s.R_dn(t));
    }
    {
        Csv mfp(dir / "mfp.csv", "aggregator,row,kind,slot,mfp_up,mfp_dn,mfp_up_ru,mfp_up_rd,mfp_dn_ru,mfp_dn_rd,c_up,c_dn");
        Csv act(dir / "activation.csv", "aggregator,row,kind,slot,dphi_up,dphi_dn,traj_base,phi_lo,phi_hi");
        for (std::size_t h = 0; h < s.aggregators.size(); ++h) {
            const AggregatorResult& a = s.aggregators[h];
            const AggregatorBid& b = p.bids[h];
            for (int m = 0; m < b.region.rows(); ++m) {
                const RowTag tag = b.region.row_kind[m];
                mfp.row(a.id, m, kind_name(tag.kind), tag.t, a.mfp_up(m), a.mfp_dn(m), a.dual_up_ru(m),
                        a.dual_up_rd(m), a.dual_dn_ru(m), a.dual_dn_rd(m), b.c_up(m), b.c_dn(m));
                act.row(a.id, m, kind_name(tag.kind), tag.t, a.ranges.dphi_up(m), a.ranges.dphi_dn(m),
                        b.region.traj_base(m), b.region.phi_lo(m), b.region.phi_hi(m));
            }
        }
    }
    {
        Csv c(dir / "kkt.csv", "aggregator,interior_rows,max_residual,degenerate,note");
        for (const KktAggregatorReport& k : r.kkt)
            c.row(k.id, static_cast<int>(k.interior_rows.size()), k.max_residual, k.degenerate, k.note);
    }
    {
        const lp::Problem& pr = s.lp.problem;
        Csv c(dir / "solution.csv", "index,column,value,lower,upper,cost");
        for (int j = 0; j < pr.num_cols(); ++j)
            c.row(j, pr.columns[j].name, s.lp_solution.primal(j), pr.columns[j].lower, pr.columns[j].upper,
                  pr.columns[j].cost);
        Csv d(dir / "duals.csv", "index,row,dual");
        for (int i = 0; i < pr.num_rows(); ++i) d.row(i, pr.rows[i].name, s.lp_solution.row_dual(i));
    }

    nlohmann::ordered_json m = scenario_header(p);
    m["status"] = lp::to_string(s.status);
    m["objective_eur"] = fmt(s.lp_solution.objective);
    m["files"] = {
        {"costs.csv", "cost breakdown: C_Base, C_Energy, R_Capacity, C_Flexibility, C_net"},
        {"settlement.csv", "payments, revenue-adequacy lhs, surplus, voltage-dual flag"},
        {"payments.csv", "per-aggregator payment and bid cost"},
        {"root_profiles.csv", "root profiles: baseline, reference, up/down reserve bounds, capacities"},
        {"mfp.csv", "per-row marginal flexibility prices and per-scenario duals"},
        {"activation.csv", "per-row activated adjustment ranges and region bounds"},
        {"kkt.csv", "stationarity residuals on interior rows"},
        {"solution.csv", "clearing LP column values, bounds and costs"},
        {"duals.csv", "clearing LP row duals (decrease of cost per unit relaxation)"},
    };
    write_manifest(dir, m);
}

void write_sweep_report(const PreparedScenario& p, SweepMode mode, int single,
                        const std::vector<SweepRow>& rows, const std::string& dir_name) {
    const fs::path dir(dir_name);
    fs::create_directories(dir);
    const std::string file = mode == SweepMode::All ? "sweep_all.csv" : "sweep_single.csv";
    {
        Csv c(dir / file, mode == SweepMode::All ? "beta,ok,C_net_eur,C_Flexibility_eur,message"
                                                 : "beta,ok,payment_eur,true_cost_eur,profit_eur,message");
        for (const SweepRow& r : rows) {
            if (mode == SweepMode::All) c.row(r.beta, r.ok, r.C_net, r.C_Flexibility, r.message);
            else c.row(r.beta, r.ok, r.payment, r.true_cost, r.profit, r.message);
        }
    }
    nlohmann::ordered_json m = scenario_header(p);
    m["mode"] = mode == SweepMode::All ? "ALL" : "SINGLE";
    if (mode == SweepMode::Single) m["aggregator"] = p.bids.at(single).id;
    m["files"] = {{file, "one row per beta; ok=0 marks a failed clearing"}};
    write_manifest(dir, m);
}

}  // namespace dsoflex
