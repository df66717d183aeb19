#include "coiner/model_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "coiner/error.hpp"

namespace coiner {

using nlohmann::json;

ModelBundle::ModelBundle(features::FeatureModel features, ml::TrainedModel classifier,
                         Granularity granularity, std::uint64_t corpus_fingerprint,
                         std::size_t training_size)
    : features_(std::move(features)),
      classifier_(std::move(classifier)),
      granularity_(granularity),
      fingerprint_(corpus_fingerprint),
      training_size_(training_size) {}

ModelBundle ModelBundle::train(const LabeledCorpus& corpus, const features::FeatureConfig& config,
                               const ml::AlgorithmSpec& spec, features::PatternLexicons lexicons,
                               text::StopwordList stopwords) {
  spec.validate();
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& s : corpus.sentences()) texts.push_back(s.text);
  auto fm = features::FeatureModel::fit(texts, config, std::move(lexicons), std::move(stopwords));
  const auto m = spec.uses_counts() ? fm.count_matrix(texts) : fm.tfidf_matrix(texts);
  const auto labels = corpus.labels();
  auto model = ml::fit(spec, m, labels);
  return ModelBundle(std::move(fm), std::move(model), corpus.granularity(), corpus.fingerprint(),
                     corpus.size());
}

features::SparseVector ModelBundle::vectorize(std::string_view sentence) const {
  return classifier_.spec().uses_counts() ? features_.counts(sentence) : features_.tfidf(sentence);
}

SentencePrediction ModelBundle::predict(std::string_view sentence) const {
  const auto p = classifier_.predict(vectorize(sentence));
  const auto names = label_names(granularity_);
  return {names.at(static_cast<std::size_t>(p.label)), p.label, p.confidence};
}

std::string ModelBundle::fingerprint_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fingerprint_));
  return buf;
}

json ModelBundle::provenance() const {
  return {{"spec", ml::to_json(classifier_.spec())},
          {"granularity", to_string(granularity_)},
          {"corpus_fingerprint", fingerprint_hex()},
          {"training_size", training_size_},
          {"vocabulary_size", features_.dimension()},
          {"format_version", kModelFormatVersion}};
}

namespace {

json lexicons_json(const features::PatternLexicons& l) {
  return {{"action_verbs", l.action_verbs},
          {"technical_keywords", l.technical_keywords},
          {"io_terms", l.io_terms},
          {"goal_terms", l.goal_terms},
          {"conditional_markers", l.conditional_markers}};
}

features::PatternLexicons lexicons_from(const json& j) {
  features::PatternLexicons l;
  l.action_verbs = j.at("action_verbs").get<std::vector<std::string>>();
  l.technical_keywords = j.at("technical_keywords").get<std::vector<std::string>>();
  l.io_terms = j.at("io_terms").get<std::vector<std::string>>();
  l.goal_terms = j.at("goal_terms").get<std::vector<std::string>>();
  l.conditional_markers = j.at("conditional_markers").get<std::vector<std::string>>();
  return l;
}

}  // namespace

std::string ModelBundle::serialize() const {
  const auto& fc = features_.config();
  std::vector<std::string> stop(features_.stopwords().words().begin(),
                                features_.stopwords().words().end());
  std::sort(stop.begin(), stop.end());
  json j;
  j["format_version"] = kModelFormatVersion;
  j["granularity"] = to_string(granularity_);
  j["labels"] = label_names(granularity_);
  j["corpus"] = {{"fingerprint", fingerprint_hex()}, {"size", training_size_}};
  j["features"] = {
      {"config",
       {{"nmax", fc.nmax}, {"min_df", fc.min_df}, {"use_pattern_lexicons", fc.use_pattern_lexicons}}},
      {"vocabulary", features_.vocabulary().features()},
      {"idf",
       {{"documents", features_.idf().documents},
        {"document_frequency", features_.idf().document_frequency},
        {"idf", features_.idf().idf}}},
      {"lexicons", lexicons_json(features_.lexicons())},
      {"stopwords", stop}};
  j["model"] = classifier_.to_json();
  return j.dump() + "\n";
}

ModelBundle ModelBundle::parse(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Persistence, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(ErrorCode::Persistence,
                  "unsupported model format version " + std::to_string(version));
    }
    const auto g = parse_granularity(j.at("granularity").get<std::string>());
    if (!g) throw Error(ErrorCode::Persistence, "model file has an unknown granularity");
    const auto& f = j.at("features");
    features::FeatureConfig fc;
    fc.nmax = f.at("config").at("nmax").get<int>();
    fc.min_df = f.at("config").at("min_df").get<int>();
    fc.use_pattern_lexicons = f.at("config").at("use_pattern_lexicons").get<bool>();
    features::IdfTable idf;
    idf.documents = f.at("idf").at("documents").get<std::size_t>();
    idf.document_frequency = f.at("idf").at("document_frequency").get<std::vector<std::uint32_t>>();
    idf.idf = f.at("idf").at("idf").get<std::vector<double>>();
    features::Vocabulary vocab(f.at("vocabulary").get<std::vector<std::string>>());
    if (idf.idf.size() != vocab.size() || idf.document_frequency.size() != vocab.size()) {
      throw Error(ErrorCode::Persistence, "model file idf table does not match its vocabulary");
    }
    const auto words = f.at("stopwords").get<std::vector<std::string>>();
    text::StopwordList stop(std::unordered_set<std::string>(words.begin(), words.end()));
    features::FeatureModel fm(fc, std::move(vocab), std::move(idf),
                              lexicons_from(f.at("lexicons")), std::move(stop));
    auto model = ml::TrainedModel::from_json(j.at("model"));
    if (model.dimension() != fm.dimension()) {
      throw Error(ErrorCode::Persistence, "model dimension does not match its vocabulary");
    }
    const auto fp = j.at("corpus").at("fingerprint").get<std::string>();
    return ModelBundle(std::move(fm), std::move(model), *g, std::stoull(fp, nullptr, 16),
                       j.at("corpus").at("size").get<std::size_t>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Persistence, std::string("malformed model file: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::Persistence, "malformed corpus fingerprint in model file");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Persistence) throw;
    throw Error(ErrorCode::Persistence, std::string("malformed model file: ") + e.what());
  }
}

void ModelBundle::save(const std::filesystem::path& path) const {
  const auto data = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write model file " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing model file " + path.string());
}

ModelBundle ModelBundle::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace coiner
