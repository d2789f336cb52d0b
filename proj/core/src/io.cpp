#include "osdx/io.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace osdx {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

ojson kinds_to_json(const ExamSet& set) {
    ojson arr = ojson::array();
    for (ExamKind k : set.kinds()) arr.push_back(exam_kind_name(k));
    return arr;
}

ExamSet kinds_from_json(const json& arr) {
    ExamSet set;
    for (const auto& name : arr) {
        const auto kind = exam_kind_from_name(name.get<std::string>());
        if (!kind) {
            throw std::runtime_error("unknown exam kind: " +
                                     name.get<std::string>());
        }
        set.insert(*kind);
    }
    return set;
}

ojson vector_to_json(const Eigen::VectorXd& v) {
    ojson arr = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
    Eigen::VectorXd v(arr.size());
    Eigen::Index i = 0;
    for (const auto& x : arr) v[i++] = x.get<double>();
    return v;
}

}  // namespace

void write_cohort_jsonl(const std::vector<VisitRecord>& cohort,
                        const std::string& path) {
    std::ofstream out = open_out(path);
    for (const VisitRecord& v : cohort) {
        ojson j;
        j["subject_id"] = v.subject_id;
        j["visit_index"] = v.visit_index;
        j["label"] = diagnosis_class_name(v.label.cls);
        if (v.label.true_subtype) j["subtype"] = *v.label.true_subtype;
        ojson rows;
        for (ExamKind kind : canonical_exam_order()) {
            const auto it = v.rows.find(kind);
            if (it == v.rows.end()) continue;
            rows[exam_kind_name(kind)] = vector_to_json(it->second.values);
        }
        j["rows"] = std::move(rows);
        out << j.dump() << "\n";
    }
}

std::vector<VisitRecord> read_cohort_jsonl(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<VisitRecord> cohort;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = json::parse(line);
        VisitRecord v;
        v.subject_id = j.at("subject_id").get<std::string>();
        v.visit_index = j.at("visit_index").get<int>();
        const auto cls =
            diagnosis_class_from_name(j.at("label").get<std::string>());
        if (!cls) {
            throw std::runtime_error("bad label at line " +
                                     std::to_string(line_no));
        }
        v.label.cls = *cls;
        if (j.contains("subtype")) {
            v.label.true_subtype = j.at("subtype").get<std::string>();
        }
        for (const auto& [name, values] : j.at("rows").items()) {
            const auto kind = exam_kind_from_name(name);
            if (!kind) {
                throw std::runtime_error("bad exam kind at line " +
                                         std::to_string(line_no));
            }
            FeatureRow row;
            row.kind = *kind;
            row.values = vector_from_json(values);
            v.rows.emplace(*kind, std::move(row));
        }
        cohort.push_back(std::move(v));
    }
    return cohort;
}

void write_institutions_json(const std::vector<InstitutionProfile>& profiles,
                             const std::string& path) {
    ojson arr = ojson::array();
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        ojson j;
        j["id"] = i;
        j["executable"] = kinds_to_json(profiles[i].executable);
        arr.push_back(std::move(j));
    }
    open_out(path) << arr.dump(2) << "\n";
}

std::vector<InstitutionProfile> read_institutions_json(const std::string& path) {
    json arr;
    open_in(path) >> arr;
    std::vector<InstitutionProfile> out;
    for (const auto& j : arr) {
        InstitutionProfile p;
        p.executable = kinds_from_json(j.at("executable"));
        p.executable.insert(ExamKind::Base);
        out.push_back(p);
    }
    return out;
}

void write_calibration_json(const OpenMaxCalibration& cal,
                            const std::string& path) {
    ojson j;
    j["alpha"] = cal.alpha;
    j["flag_f"] = cal.flag_f;
    j["classic_weights"] = cal.classic_weights;
    j["unit_normalize"] = cal.unit_normalize;
    ojson classes = ojson::array();
    for (int c = 0; c < cal.n_classes(); ++c) {
        ojson jc;
        ojson centers = ojson::array();
        for (Eigen::Index r = 0; r < cal.centers[c].centers.rows(); ++r) {
            centers.push_back(
                vector_to_json(cal.centers[c].centers.row(r).transpose()));
        }
        jc["centers"] = std::move(centers);
        const WeibullTailModel& m = cal.models[static_cast<std::size_t>(c)];
        jc["weibull"] = ojson{{"tau", m.tau},
                              {"lambda", m.lambda},
                              {"kappa", m.kappa},
                              {"tail_size", m.tail_size}};
        jc["threshold"] = cal.thresholds[static_cast<std::size_t>(c)];
        jc["quantile"] = cal.quantiles[static_cast<std::size_t>(c)];
        classes.push_back(std::move(jc));
    }
    j["classes"] = std::move(classes);
    open_out(path) << j.dump(2) << "\n";
}

OpenMaxCalibration read_calibration_json(const std::string& path) {
    json j;
    open_in(path) >> j;
    OpenMaxCalibration cal;
    cal.alpha = j.at("alpha").get<int>();
    cal.flag_f = j.at("flag_f").get<bool>();
    cal.classic_weights = j.at("classic_weights").get<bool>();
    cal.unit_normalize = j.at("unit_normalize").get<bool>();
    for (const auto& jc : j.at("classes")) {
        const auto& jcenters = jc.at("centers");
        CenterSet cs;
        cs.centers.resize(static_cast<Eigen::Index>(jcenters.size()),
                          jcenters.empty()
                              ? 0
                              : static_cast<Eigen::Index>(jcenters[0].size()));
        Eigen::Index r = 0;
        for (const auto& row : jcenters) {
            cs.centers.row(r++) = vector_from_json(row).transpose();
        }
        cal.centers.push_back(std::move(cs));
        const auto& jm = jc.at("weibull");
        cal.models.push_back(WeibullTailModel{
            jm.at("tau").get<double>(), jm.at("lambda").get<double>(),
            jm.at("kappa").get<double>(),
            jm.at("tail_size").get<std::size_t>()});
        cal.thresholds.push_back(jc.at("threshold").get<double>());
        cal.quantiles.push_back(jc.at("quantile").get<double>());
    }
    return cal;
}

void write_rewards_jsonl(const std::vector<VisitRecord>& cohort,
                         const std::vector<ExaminationRecord>& records,
                         const std::string& path) {
    std::ofstream out = open_out(path);
    for (const ExaminationRecord& rec : records) {
        const VisitRecord& v = cohort.at(rec.visit_index);
        ojson j;
        j["subject_id"] = v.subject_id;
        j["visit_index"] = v.visit_index;
        j["obs_kinds"] = kinds_to_json(rec.reward.obs_kinds);
        j["pred"] = vector_to_json(rec.reward.pred);
        j["action_kinds"] = kinds_to_json(rec.reward.action);
        j["reward"] = rec.reward.reward;
        out << j.dump() << "\n";
    }
}

std::vector<ExaminationRecord> read_rewards_jsonl(
    const std::vector<VisitRecord>& cohort, const std::string& path) {
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        index[{cohort[i].subject_id, cohort[i].visit_index}] = i;
    }
    std::ifstream in = open_in(path);
    std::vector<ExaminationRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        const auto key = std::make_pair(j.at("subject_id").get<std::string>(),
                                        j.at("visit_index").get<int>());
        const auto it = index.find(key);
        if (it == index.end()) {
            throw std::runtime_error("reward record without cohort visit: " +
                                     key.first);
        }
        ExaminationRecord rec;
        rec.visit_index = it->second;
        rec.reward.obs_kinds = kinds_from_json(j.at("obs_kinds"));
        const Eigen::VectorXd pred = vector_from_json(j.at("pred"));
        if (pred.size() != 3) throw std::runtime_error("bad pred length");
        rec.reward.pred = pred;
        rec.reward.action = kinds_from_json(j.at("action_kinds"));
        rec.reward.reward = j.at("reward").get<double>();
        out.push_back(std::move(rec));
    }
    return out;
}

void write_traces_jsonl(const std::vector<TraceRecord>& traces,
                        const std::string& path) {
    std::ofstream out = open_out(path);
    for (const TraceRecord& t : traces) {
        ojson j;
        j["subject_id"] = t.subject_id;
        j["visit_index"] = t.visit_index;
        j["true_label"] = diagnosis_class_name(t.truth.cls);
        if (t.truth.true_subtype) j["true_subtype"] = *t.truth.true_subtype;
        j["institution"] = t.institution;
        j["final"] = diagnosis_class_name(t.trace.final.cls);
        j["steps"] = t.trace.steps;
        j["adjustments"] = t.trace.adjustments;
        j["max_steps_hit"] = t.trace.max_steps_hit;
        j["final_pred"] = vector_to_json(t.trace.final_pred);
        ojson reqs = ojson::array();
        for (const TraceRequest& r : t.trace.requested) {
            reqs.push_back(ojson::array(
                {r.step, exam_kind_name(r.kind), r.granted}));
        }
        j["requested"] = std::move(reqs);
        out << j.dump() << "\n";
    }
}

std::vector<TraceRecord> read_traces_jsonl(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<TraceRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        TraceRecord t;
        t.subject_id = j.at("subject_id").get<std::string>();
        t.visit_index = j.at("visit_index").get<int>();
        t.truth.cls =
            *diagnosis_class_from_name(j.at("true_label").get<std::string>());
        if (j.contains("true_subtype")) {
            t.truth.true_subtype = j.at("true_subtype").get<std::string>();
        }
        t.institution = j.at("institution").get<int>();
        t.trace.final.cls =
            *diagnosis_class_from_name(j.at("final").get<std::string>());
        t.trace.steps = j.at("steps").get<int>();
        t.trace.adjustments = j.at("adjustments").get<int>();
        t.trace.max_steps_hit = j.at("max_steps_hit").get<bool>();
        const Eigen::VectorXd pred = vector_from_json(j.at("final_pred"));
        if (pred.size() != 3) throw std::runtime_error("bad final_pred length");
        t.trace.final_pred = pred;
        for (const auto& r : j.at("requested")) {
            TraceRequest req;
            req.step = r.at(0).get<int>();
            req.kind = *exam_kind_from_name(r.at(1).get<std::string>());
            req.granted = r.at(2).get<bool>();
            t.trace.requested.push_back(req);
        }
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

constexpr char kParamMagic[8] = {'O', 'S', 'D', 'X', 'P', 'A', 'R', '1'};

void write_params_file(const std::string& path, const ojson& header,
                       const nn::ParamPack& params) {
    std::ofstream out = open_out(path, /*binary=*/true);
    out.write(kParamMagic, sizeof(kParamMagic));
    const std::string htext = header.dump();
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    out.write(reinterpret_cast<const char*>(params.values().data()),
              static_cast<std::streamsize>(sizeof(double) *
                                           static_cast<std::size_t>(
                                               params.values().size())));
}

json read_params_file(const std::string& path, Eigen::VectorXd& values) {
    std::ifstream in = open_in(path, /*binary=*/true);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("not a parameter file: " + path);
    }
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    const json header = json::parse(htext);
    const std::uint64_t count = header.at("param_count").get<std::uint64_t>();
    values.resize(static_cast<Eigen::Index>(count));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(sizeof(double) * count));
    if (!in) throw std::runtime_error("truncated parameter file: " + path);
    return header;
}

ojson specs_to_json(const nn::ParamPack& params) {
    ojson arr = ojson::array();
    for (const nn::TensorSpec& s : params.specs()) {
        arr.push_back(ojson{{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}});
    }
    return arr;
}

}  // namespace

void save_backbone(const BackboneNet& net, const std::string& path) {
    const BackboneConfig& c = net.config();
    ojson header;
    header["kind"] = "backbone";
    header["param_count"] = net.params().size();
    header["config"] = ojson{
        {"width", c.width},
        {"n_kinds", c.n_kinds},
        {"encoder_widths", c.encoder_widths},
        {"classifier_widths", c.classifier_widths},
        {"n_classes", c.n_classes},
        {"decoder_classifier_link", c.decoder_classifier_link},
        {"hidden_activation", nn::activation_name(c.hidden_activation)},
        {"alpha", c.alpha},
        {"beta", c.beta},
        {"mu", c.mu},
    };
    header["tensors"] = specs_to_json(net.params());
    write_params_file(path, header, net.params());
}

BackboneNet load_backbone(const std::string& path) {
    Eigen::VectorXd values;
    const json header = read_params_file(path, values);
    if (header.at("kind").get<std::string>() != "backbone") {
        throw std::runtime_error("not a backbone parameter file: " + path);
    }
    const json& c = header.at("config");
    BackboneConfig cfg;
    cfg.width = c.at("width").get<Eigen::Index>();
    cfg.n_kinds = c.at("n_kinds").get<int>();
    cfg.encoder_widths = c.at("encoder_widths").get<std::vector<Eigen::Index>>();
    cfg.classifier_widths =
        c.at("classifier_widths").get<std::vector<Eigen::Index>>();
    cfg.n_classes = c.at("n_classes").get<int>();
    cfg.decoder_classifier_link = c.at("decoder_classifier_link").get<bool>();
    cfg.hidden_activation =
        nn::activation_from_name(c.at("hidden_activation").get<std::string>());
    cfg.alpha = c.at("alpha").get<double>();
    cfg.beta = c.at("beta").get<double>();
    cfg.mu = c.at("mu").get<double>();
    BackboneNet net(cfg, 0);
    if (net.params().size() != values.size()) {
        throw std::runtime_error("parameter count mismatch in " + path);
    }
    net.params().values() = values;
    return net;
}

void save_recommender(const RecommenderNet& net, const std::string& path) {
    const RecommenderConfig& c = net.config();
    ojson header;
    header["kind"] = "recommender";
    header["param_count"] = net.params().size();
    header["config"] = ojson{
        {"width", c.width},
        {"hidden", c.hidden},
        {"layers", c.layers},
        {"encoder", c.encoder == EncoderKind::Bilstm ? "bilstm" : "meanpool"},
        {"predictor_layers", c.predictor_layers},
        {"predictor_width", c.predictor_width},
        {"forget_bias", c.forget_bias},
        {"hidden_activation", nn::activation_name(c.hidden_activation)},
    };
    header["tensors"] = specs_to_json(net.params());
    write_params_file(path, header, net.params());
}

RecommenderNet load_recommender(const std::string& path) {
    Eigen::VectorXd values;
    const json header = read_params_file(path, values);
    if (header.at("kind").get<std::string>() != "recommender") {
        throw std::runtime_error("not a recommender parameter file: " + path);
    }
    const json& c = header.at("config");
    RecommenderConfig cfg;
    cfg.width = c.at("width").get<Eigen::Index>();
    cfg.hidden = c.at("hidden").get<int>();
    cfg.layers = c.at("layers").get<int>();
    cfg.encoder = c.at("encoder").get<std::string>() == "bilstm"
                      ? EncoderKind::Bilstm
                      : EncoderKind::MeanPool;
    cfg.predictor_layers = c.at("predictor_layers").get<int>();
    cfg.predictor_width = c.at("predictor_width").get<Eigen::Index>();
    cfg.forget_bias = c.at("forget_bias").get<double>();
    cfg.hidden_activation =
        nn::activation_from_name(c.at("hidden_activation").get<std::string>());
    RecommenderNet net(cfg, 0);
    if (net.params().size() != values.size()) {
        throw std::runtime_error("parameter count mismatch in " + path);
    }
    net.params().values() = values;
    return net;
}

CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
    CohortSpec spec;
    spec.seed = j.value("seed", spec.seed);
    spec.n_subjects = j.value("n_subjects", spec.n_subjects);
    spec.width = j.value("width", spec.width);
    if (j.contains("classes")) {
        spec.classes.clear();
        for (const auto& [name, jc] : j.at("classes").items()) {
            ClassGenSpec c;
            c.prior = jc.at("prior").get<double>();
            c.position = jc.at("position").get<double>();
            c.stddev = jc.value("stddev", 1.0);
            c.known = jc.value("known", name == "AD" || name == "CN");
            spec.classes[name] = c;
        }
    }
    if (j.contains("exams")) {
        for (const auto& [name, je] : j.at("exams").items()) {
            const auto kind = exam_kind_from_name(name);
            if (!kind) throw std::runtime_error("bad exam kind: " + name);
            ExamGenSpec& e = spec.exams[static_cast<std::size_t>(*kind)];
            e.missingness = je.value("missingness", e.missingness);
            e.separation = je.value("separation", e.separation);
        }
    }
    if (j.contains("visits_per_subject")) {
        spec.visits_per_subject =
            j.at("visits_per_subject").get<std::vector<double>>();
    }
    if (j.contains("institutions")) {
        spec.n_institutions = j.at("institutions").value("count", spec.n_institutions);
        spec.refusal_rate =
            j.at("institutions").value("refusal_rate", spec.refusal_rate);
    }
    spec.validate();
    return spec;
}

nlohmann::ordered_json cohort_spec_to_json(const CohortSpec& spec) {
    ojson j;
    j["seed"] = spec.seed;
    j["n_subjects"] = spec.n_subjects;
    j["width"] = spec.width;
    ojson classes;
    for (const auto& [name, c] : spec.classes) {
        classes[name] = ojson{{"prior", c.prior},
                              {"position", c.position},
                              {"stddev", c.stddev},
                              {"known", c.known}};
    }
    j["classes"] = std::move(classes);
    ojson exams;
    for (ExamKind kind : canonical_exam_order()) {
        const ExamGenSpec& e = spec.exams[static_cast<std::size_t>(kind)];
        exams[exam_kind_name(kind)] = ojson{{"missingness", e.missingness},
                                            {"separation", e.separation}};
    }
    j["exams"] = std::move(exams);
    j["visits_per_subject"] = spec.visits_per_subject;
    j["institutions"] = ojson{{"count", spec.n_institutions},
                              {"refusal_rate", spec.refusal_rate}};
    return j;
}

CohortSpec read_cohort_spec(const std::string& path) {
    json j;
    open_in(path) >> j;
    return cohort_spec_from_json(j);
}

}  // namespace osdx
