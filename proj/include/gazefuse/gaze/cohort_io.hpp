#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gazefuse/errors.hpp"
#include "gazefuse/gaze/cohort.hpp"
#include "gazefuse/gaze/scanpath_io.hpp"

namespace gazefuse::gaze {

// On-disk cohort:
//
//   <dir>/manifest.json            subjects, labels, file paths, stimuli,
//                                  generator config and seed
//   <dir>/scanpaths/<subject>.csv  scanpath CSV (see scanpath_io.hpp)
//   <dir>/modalities/<subject>.csv "modality,index,value" rows for the
//                                  speech and visual stand-in vectors

inline constexpr const char* kCohortFormat = "gazefuse-cohort/1";

inline nlohmann::ordered_json cohort_config_json(const CohortConfig& c) {
  nlohmann::ordered_json j;
  j["n_asd"] = c.n_asd;
  j["n_td"] = c.n_td;
  j["stimuli"] = c.stimuli;
  j["category_mix"] = c.category_mix;
  j["min_fixations"] = c.min_fixations;
  j["max_fixations"] = c.max_fixations;
  j["class_gap"] = c.class_gap;
  j["social_dwell_td"] = c.social_dwell_td;
  j["social_dwell_gap"] = c.social_dwell_gap;
  j["spread_td"] = c.spread_td;
  j["spread_gap"] = c.spread_gap;
  j["saccade_speed_td"] = c.saccade_speed_td;
  j["saccade_speed_gap"] = c.saccade_speed_gap;
  j["fixation_ms_mean"] = c.fixation_ms_mean;
  j["fixation_ms_sd"] = c.fixation_ms_sd;
  j["sample_rate_hz"] = c.sample_rate_hz;
  j["sample_noise"] = c.sample_noise;
  j["blink_probability"] = c.blink_probability;
  j["dropout_probability"] = c.dropout_probability;
  j["modality_shift"] = c.modality_shift;
  j["speech_dim"] = c.speech_dim;
  j["visual_dim"] = c.visual_dim;
  j["blink_gap_ms"] = c.preprocess.blink_gap_ms;
  j["dispersion_threshold"] = c.preprocess.dispersion_threshold;
  j["min_fixation_ms"] = c.preprocess.min_fixation_ms;
  j["screen_w"] = c.preprocess.screen_w;
  j["screen_h"] = c.preprocess.screen_h;
  return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

inline void write_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "scanpaths", ec);
  if (!ec) fs::create_directories(dir / "modalities", ec);
  if (ec) throw IoError("cannot create cohort directory '" + dir.string() + "': " + ec.message());

  nlohmann::ordered_json manifest;
  manifest["format"] = kCohortFormat;
  manifest["seed"] = cohort.seed;
  manifest["generator"] = cohort_config_json(cohort.config);
  auto& stimuli = manifest["stimuli"] = nlohmann::ordered_json::array();
  for (const auto& s : cohort.stimuli) {
    stimuli.push_back({{"id", s.id},
                       {"category", std::string(category_name(s.category))},
                       {"social_region", {s.social.x0, s.social.y0, s.social.x1, s.social.y1}}});
  }
  auto& subjects = manifest["subjects"] = nlohmann::ordered_json::array();
  for (const auto& subj : cohort.subjects) {
    const std::string scan_rel = "scanpaths/" + subj.id + ".csv";
    const std::string mod_rel = "modalities/" + subj.id + ".csv";
    write_text_file(dir / scan_rel, scanpaths_to_string(subj.paths));
    std::ostringstream mod;
    mod << "modality,index,value\n";
    for (std::size_t k = 0; k < subj.speech.size(); ++k) mod << "speech," << k << ',' << detail::format_double(subj.speech[k]) << '\n';
    for (std::size_t k = 0; k < subj.visual.size(); ++k) mod << "visual," << k << ',' << detail::format_double(subj.visual[k]) << '\n';
    write_text_file(dir / mod_rel, mod.str());
    subjects.push_back({{"id", subj.id},
                        {"label", subj.label},
                        {"scanpaths", scan_rel},
                        {"modalities", mod_rel},
                        {"n_scanpaths", subj.paths.size()}});
  }
  manifest["n_subjects"] = cohort.subjects.size();
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

struct LoadedCohort {
  Cohort cohort;
  std::size_t warnings = 0;
  std::vector<std::string> messages;
};

inline LoadedCohort read_cohort(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IoError("no cohort manifest at '" + manifest_path.string() + "'");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  if (m.value("format", "") != kCohortFormat) throw IoError("unsupported cohort format");
  LoadedCohort out;
  auto& c = out.cohort;
  c.seed = m.at("seed").get<std::uint64_t>();
  const auto& g = m.at("generator");
  c.config.n_asd = g.at("n_asd");
  c.config.n_td = g.at("n_td");
  c.config.stimuli = g.at("stimuli");
  c.config.speech_dim = g.at("speech_dim");
  c.config.visual_dim = g.at("visual_dim");
  c.config.class_gap = g.at("class_gap");
  for (const auto& s : m.at("stimuli")) {
    Stimulus st;
    st.id = s.at("id");
    st.category = parse_category(s.at("category").get<std::string>());
    const auto& r = s.at("social_region");
    st.social = {r.at(0), r.at(1), r.at(2), r.at(3)};
    c.stimuli.push_back(st);
  }
  for (const auto& s : m.at("subjects")) {
    Subject subj;
    subj.id = s.at("id");
    subj.label = s.at("label");
    auto parsed = parse_scanpaths_file((dir / s.at("scanpaths").get<std::string>()).string());
    out.warnings += parsed.warnings;
    for (auto& msg : parsed.messages) out.messages.push_back(subj.id + ": " + msg);
    subj.paths = std::move(parsed.paths);
    std::istringstream mod(read_text_file(dir / s.at("modalities").get<std::string>()));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(mod, line)) {
      ++line_no;
      if (line_no == 1 || line.empty()) continue;
      const auto f = detail::split_csv(line);
      if (f.size() != 3) throw ParseError(line_no, "modality rows need 3 fields");
      const double v = detail::parse_double(f[2], line_no, "value");
      if (f[0] == "speech") {
        subj.speech.push_back(v);
      } else if (f[0] == "visual") {
        subj.visual.push_back(v);
      } else {
        throw ParseError(line_no, "unknown modality '" + f[0] + "'");
      }
    }
    c.subjects.push_back(std::move(subj));
  }
  return out;
}

}  // namespace gazefuse::gaze
