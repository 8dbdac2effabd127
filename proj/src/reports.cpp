#include "epic/reports.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace epic::io {
namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

stats::KmCurve km_from_json(const json& j) {
  stats::KmCurve km;
  km.times = j.at("times").get<std::vector<double>>();
  km.survival = j.at("survival").get<std::vector<double>>();
  km.at_risk = j.at("at_risk").get<std::vector<long>>();
  km.events = j.at("events").get<std::vector<long>>();
  return km;
}

}  // namespace

json to_json(const loss::LossBreakdown& b) {
  return {{"nlpl", b.nlpl}, {"clustering", b.clustering}, {"stratification", b.stratification}, {"total", b.total}};
}

json to_json(const stats::KmCurve& km) {
  return {{"times", km.times}, {"survival", km.survival}, {"at_risk", km.at_risk}, {"events", km.events}};
}

json to_json(const train::EvalReport& r) {
  json risks = json::array();
  for (std::size_t i = 0; i < r.risks.size(); ++i) {
    risks.push_back({{"subject_id", r.subject_ids.at(i)}, {"risk", r.risks[i]}});
  }
  json j = {{"label", r.label},
            {"fold_id", r.fold_id ? json(*r.fold_id) : json(nullptr)},
            {"n", r.risks.size()},
            {"risks", std::move(risks)}};
  if (r.error) {
    j["error"] = *r.error;
    return j;
  }
  j["ci"] = r.ci;
  j["logrank"] = {{"chi_square", r.logrank.chi_square}, {"p_value", r.logrank.p_value}, {"df", r.logrank.df}};
  j["groups"] = {{"low", r.low}, {"high", r.high}};
  j["km_low"] = to_json(r.km_low);
  j["km_high"] = to_json(r.km_high);
  return j;
}

train::EvalReport report_from_json(const json& j) {
  train::EvalReport r;
  r.label = j.at("label").get<std::string>();
  if (!j.at("fold_id").is_null()) r.fold_id = j.at("fold_id").get<int>();
  for (const auto& item : j.at("risks")) {
    r.subject_ids.push_back(item.at("subject_id").get<std::string>());
    r.risks.push_back(item.at("risk").get<double>());
  }
  if (j.contains("error")) {
    r.error = j.at("error").get<std::string>();
    return r;
  }
  r.ci = j.at("ci").get<double>();
  r.logrank.chi_square = j.at("logrank").at("chi_square").get<double>();
  r.logrank.p_value = j.at("logrank").at("p_value").get<double>();
  r.logrank.df = j.at("logrank").at("df").get<int>();
  r.low = j.at("groups").at("low").get<std::vector<std::size_t>>();
  r.high = j.at("groups").at("high").get<std::vector<std::size_t>>();
  r.km_low = km_from_json(j.at("km_low"));
  r.km_high = km_from_json(j.at("km_high"));
  return r;
}

json to_json(const train::StepLog& s) {
  json j = {{"type", "step"},
            {"epoch", s.epoch},
            {"batch", s.batch},
            {"n_slides", s.n_slides},
            {"n_events", s.n_events},
            {"loss", to_json(s.loss)},
            {"batch_ci", s.batch_ci ? json(*s.batch_ci) : json(nullptr)}};
  if (s.warning) j["warning"] = *s.warning;
  return j;
}

json epoch_line(const train::EpochSummary& e) {
  return {{"type", "epoch"},
          {"epoch", e.epoch},
          {"batches", e.batches},
          {"skipped_nlpl", e.skipped_nlpl},
          {"mean_loss", to_json(e.mean)},
          {"val_ci", e.val_ci ? json(*e.val_ci) : json(nullptr)}};
}

std::string km_csv(const stats::KmCurve& km) {
  std::ostringstream os;
  os << "time,survival,at_risk,events\n";
  for (std::size_t i = 0; i < km.times.size(); ++i) {
    os << fmt_double(km.times[i]) << ',' << fmt_double(km.survival[i]) << ',' << km.at_risk[i] << ','
       << km.events[i] << '\n';
  }
  return os.str();
}

std::string risks_csv(std::span<const std::string> ids, std::span<const double> risks,
                      std::span<const stats::SurvivalRecord> records) {
  std::ostringstream os;
  os << "subject_id,risk,time,event\n";
  for (std::size_t i = 0; i < risks.size(); ++i) {
    os << ids[i] << ',' << fmt_double(risks[i]) << ',' << fmt_double(records[i].time) << ','
       << (records[i].event ? 1 : 0) << '\n';
  }
  return os.str();
}

json parts_dump(std::span<const parts::SlideParts> slides) {
  json out = json::array();
  for (const auto& s : slides) {
    json parts = json::array();
    for (std::size_t j = 0; j < s.empty_mask.size(); ++j) {
      parts.push_back({{"part", j}, {"empty", static_cast<bool>(s.empty_mask[j])}, {"tile_ids", s.representatives[j]}});
    }
    out.push_back({{"slide_id", s.slide_id}, {"parts", std::move(parts)}});
  }
  return out;
}

json checkpoint_json(const train::TrainState& state) {
  const auto& c = state.net.config();
  json layout = json::array();
  for (const auto& s : state.params.layout()) {
    layout.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
  }
  json centroids = json::array();
  for (std::size_t j = 0; j < state.centroids.k(); ++j) {
    const auto row = state.centroids.centroids.row(j);
    centroids.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"format", "epic-checkpoint"},
          {"version", kCheckpointVersion},
          {"encoder",
           {{"input_dim", c.input_dim},
            {"hidden_dims", c.hidden_dims},
            {"waist_dim", c.waist_dim},
            {"n_parts", c.n_parts},
            {"head_dims", c.head_dims},
            {"dropout", c.dropout},
            {"encoder_dropout", c.encoder_dropout},
            {"seed", c.seed}}},
          {"top_p", state.top_p},
          {"epochs_done", state.epochs_done},
          {"centroids", {{"epoch", state.centroids.epoch}, {"rows", std::move(centroids)}}},
          {"params", {{"layout", std::move(layout)}, {"values", state.params.values()}}}};
}

train::TrainState state_from_checkpoint(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "epic-checkpoint") throw std::runtime_error("not an epic checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto& e = j.at("encoder");
    net::EncoderConfig c;
    c.input_dim = e.at("input_dim").get<std::size_t>();
    c.hidden_dims = e.at("hidden_dims").get<std::vector<std::size_t>>();
    c.waist_dim = e.at("waist_dim").get<std::size_t>();
    c.n_parts = e.at("n_parts").get<std::size_t>();
    c.head_dims = e.at("head_dims").get<std::vector<std::size_t>>();
    c.dropout = e.at("dropout").get<double>();
    c.encoder_dropout = e.at("encoder_dropout").get<bool>();
    c.seed = e.at("seed").get<std::uint64_t>();

    train::TrainState state{net::EpicNet(c), {}, {}, j.at("top_p").get<std::size_t>(), j.at("epochs_done").get<int>()};
    state.params = state.net.blank_params();
    std::vector<diff::Segment> layout;
    for (const auto& s : j.at("params").at("layout")) {
      layout.push_back({s.at("name").get<std::string>(), s.at("offset").get<std::size_t>(),
                        s.at("rows").get<std::size_t>(), s.at("cols").get<std::size_t>()});
    }
    if (layout != state.params.layout()) throw std::runtime_error("parameter layout does not match architecture");
    state.params.assign(j.at("params").at("values").get<std::vector<double>>());

    state.centroids.epoch = j.at("centroids").at("epoch").get<int>();
    for (const auto& row : j.at("centroids").at("rows")) state.centroids.centroids.append_row(row.get<std::vector<double>>());
    if (state.centroids.k() != c.n_parts || state.centroids.centroids.cols() != c.waist_dim) {
      throw std::runtime_error("centroid matrix does not match n_parts x waist_dim");
    }
    return state;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void save_checkpoint(const train::TrainState& state, const std::filesystem::path& path) {
  write_text(path, checkpoint_json(state).dump() + "\n");
}

train::TrainState load_checkpoint(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return state_from_checkpoint(j);
}

}  // namespace epic::io
