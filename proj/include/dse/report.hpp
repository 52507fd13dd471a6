#pragma once

#include "dse/simulation.hpp"

#include <string>

namespace dse {

// Column layouts (1-based agents and states):
//   residuals.csv  k,agent,measured_state,residual,theta_m<m>...,crossed_m
//                  crossed_m is the largest crossed multiplier, 0 when none
//                  or during burn-in
//   msee.csv       k,agent,msee
//   events.jsonl   one object per line, "type" is "detection" or "mitigation"
//   summary.json   design certificates per configuration and detection stats
void write_trace_reports(const SimulationTrace& trace, const Scenario& s, const std::string& out_dir);

// Aggregate layouts:
//   mc_msee.csv         k,agent,mean_msee
//   mc_error.csv        k,agent,state,mean_error
//   mc_false_alarm.csv  m,kappa,nominal_rate,crossings,trials,rate,ci99_low,ci99_high
//   mc_latency.csv      attack,agent,m,run,latency  (latency empty when undetected)
//   mc_summary.json
void write_aggregate_reports(const MonteCarloResult& mc, const Scenario& s, const std::string& out_dir);

// analysis.json: SCCs, parent SCCs, structural rank, contractions, agent types.
void write_analysis_report(const Scenario& s, const std::string& out_dir);

// design.json with certificates and thresholds; gain_K.csv with the gain.
void write_design_report(const Configuration& config, const Scenario& s, const std::string& out_dir);

std::string format_number(double v);

} // namespace dse
