#include "adfe/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

namespace adfe {

using nlohmann::json;

namespace {

constexpr double kTimeEps = 1e-9;
constexpr double kDurationSlack = 0.5;

std::vector<std::string> sorted_unique(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string_view to_string(Modality m) {
    return m == Modality::Visual ? "visual" : "audio";
}

std::string_view to_string(Category c) {
    switch (c) {
        case Category::Attract: return "Attract";
        case Category::Brand: return "Brand";
        case Category::Connect: return "Connect";
        case Category::Direct: return "Direct";
        case Category::Other: return "Other";
    }
    return "Other";
}

Modality parse_modality(std::string_view s) {
    if (s == "visual") return Modality::Visual;
    if (s == "audio") return Modality::Audio;
    throw ValidationError("unknown modality '" + std::string(s) + "'");
}

Category parse_category(std::string_view s) {
    for (auto c : {Category::Attract, Category::Brand, Category::Connect, Category::Direct,
                   Category::Other})
        if (s == to_string(c)) return c;
    throw ValidationError("unknown category '" + std::string(s) + "'");
}

std::string_view to_string(IssueKind k) {
    switch (k) {
        case IssueKind::MalformedJson: return "malformed_json";
        case IssueKind::MissingField: return "missing_field";
        case IssueKind::UnknownElement: return "unknown_element";
        case IssueKind::ModalityMismatch: return "modality_mismatch";
        case IssueKind::InvalidTiming: return "invalid_timing";
        case IssueKind::OverlappingScenes: return "overlapping_scenes";
        case IssueKind::EmptyScenes: return "empty_scenes";
        case IssueKind::DurationExceeded: return "duration_exceeded";
        case IssueKind::EmptyCorpus: return "empty_corpus";
    }
    return "unknown";
}

namespace {

std::string describe(const std::vector<Issue>& issues) {
    std::ostringstream os;
    const Issue& first = issues.front();
    os << to_string(first.kind);
    if (!first.video_id.empty()) os << " [" << first.video_id << "]";
    if (first.line) os << " line " << first.line;
    os << ": " << first.message;
    if (issues.size() > 1) os << " (+" << issues.size() - 1 << " more)";
    return os.str();
}

}  // namespace

CorpusError::CorpusError(std::vector<Issue> issues)
    : ValidationError(describe(issues)), issues_(std::move(issues)) {}

// ---------------------------------------------------------------------------
// Registry

ElementRegistry::ElementRegistry(std::vector<Element> elements) : elements_(std::move(elements)) {
    for (std::size_t i = 0; i < elements_.size(); ++i) {
        if (elements_[i].id.empty()) throw ValidationError("registry: empty element id");
        if (!index_.emplace(elements_[i].id, i).second)
            throw ValidationError("registry: duplicate element id '" + elements_[i].id + "'");
    }
}

ElementRegistry ElementRegistry::default_registry() {
    using enum Modality;
    using enum Category;
    return ElementRegistry({
        {"logo", Visual, Brand, "Company logo mark"},
        {"product_image", Visual, Brand, "Image of the product"},
        {"characters", Visual, Connect, "People or characters"},
        {"product_closeup", Visual, Attract, "Close-up of the product"},
        {"character_closeup", Visual, Attract, "Close-up of people or characters"},
        {"product_text", Visual, Direct, "Text describing the product"},
        {"purchase_text", Visual, Direct, "Text encouraging viewers to buy"},
        {"motivation_text", Visual, Direct, "Text motivating viewers to consider buying"},
        {"brand_name", Audio, Brand, "Brand name mentioned"},
        {"product_name", Audio, Brand, "Product name mentioned"},
        {"company_name", Audio, Brand, "Company name mentioned"},
        {"product_description", Audio, Direct, "Sentence describing product features"},
        {"purchase_promotion", Audio, Direct, "Sentence encouraging purchase"},
        {"purchase_motivation", Audio, Direct, "Sentence giving reasons to buy"},
        {"direct_address", Audio, Connect, "Sentence addressing the viewer"},
        {"positive_words", Audio, Connect, "Positive wording"},
        {"catchphrase", Audio, Attract, "Catchphrase"},
    });
}

ElementRegistry ElementRegistry::from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("registry: malformed JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("elements") || !doc["elements"].is_array())
        throw ValidationError("registry: expected {\"elements\": [...]}");
    std::vector<Element> elements;
    for (const auto& e : doc["elements"]) {
        try {
            elements.push_back({e.at("id").get<std::string>(),
                                parse_modality(e.at("modality").get<std::string>()),
                                parse_category(e.at("category").get<std::string>()),
                                e.value("label", std::string{})});
        } catch (const json::exception& ex) {
            throw ValidationError(std::string("registry: bad element: ") + ex.what());
        }
    }
    return ElementRegistry(std::move(elements));
}

ElementRegistry ElementRegistry::load(const std::filesystem::path& path) {
    return from_json(read_file(path));
}

std::string ElementRegistry::to_json() const {
    json arr = json::array();
    for (const auto& e : elements_)
        arr.push_back({{"id", e.id},
                       {"modality", to_string(e.modality)},
                       {"category", to_string(e.category)},
                       {"label", e.label}});
    return json{{"elements", arr}}.dump(2);
}

const Element* ElementRegistry::find(std::string_view id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &elements_[it->second];
}

std::vector<std::string> ElementRegistry::ids(Modality m) const {
    std::vector<std::string> out;
    for (const auto& e : elements_)
        if (e.modality == m) out.push_back(e.id);
    return out;
}

std::size_t Corpus::scene_count() const noexcept {
    std::size_t n = 0;
    for (const auto& v : videos) n += v.scenes.size();
    return n;
}

// ---------------------------------------------------------------------------
// Symbols

std::string canonical_symbol(const ElementRegistry& registry, Modality m,
                             std::span<const std::string> ids) {
    std::vector<std::string> sorted(ids.begin(), ids.end());
    sorted = sorted_unique(std::move(sorted));
    for (const auto& id : sorted) {
        const Element* e = registry.find(id);
        if (!e) throw InvalidArgument("canonical_symbol: unknown element '" + id + "'");
        if (e->modality != m)
            throw InvalidArgument("canonical_symbol: element '" + id + "' is not " +
                                  std::string(to_string(m)));
    }
    std::string out = m == Modality::Visual ? "V[" : "A[";
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i) out += '|';
        out += sorted[i];
    }
    out += ']';
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct LineContext {
    std::size_t line;
    std::string video_id;
    std::vector<Issue>& issues;

    void add(IssueKind kind, std::string message) {
        issues.push_back({kind, line, video_id, std::move(message)});
    }
};

std::vector<std::string> read_ids(const json& scene, const char* key, Modality m,
                                  const ElementRegistry& registry, LineContext& ctx,
                                  std::size_t scene_pos) {
    std::vector<std::string> ids;
    if (!scene.contains(key)) return ids;
    const json& arr = scene[key];
    if (!arr.is_array()) {
        ctx.add(IssueKind::MissingField,
                "scene " + std::to_string(scene_pos) + ": '" + key + "' must be an array");
        return ids;
    }
    for (const auto& v : arr) {
        if (!v.is_string()) {
            ctx.add(IssueKind::MissingField,
                    "scene " + std::to_string(scene_pos) + ": element ids must be strings");
            continue;
        }
        auto id = v.get<std::string>();
        const Element* e = registry.find(id);
        if (!e) {
            ctx.add(IssueKind::UnknownElement,
                    "scene " + std::to_string(scene_pos) + ": unknown element id '" + id + "'");
            continue;
        }
        if (e->modality != m) {
            ctx.add(IssueKind::ModalityMismatch, "scene " + std::to_string(scene_pos) +
                                                     ": element '" + id + "' listed under '" +
                                                     key + "'");
            continue;
        }
        ids.push_back(std::move(id));
    }
    return sorted_unique(std::move(ids));
}

std::optional<VideoAnnotation> parse_video(const json& doc, const ElementRegistry& registry,
                                           LineContext& ctx) {
    const std::size_t before = ctx.issues.size();
    if (!doc.is_object()) {
        ctx.add(IssueKind::MalformedJson, "line is not a JSON object");
        return std::nullopt;
    }
    VideoAnnotation v;
    if (auto it = doc.find("video_id"); it != doc.end() && it->is_string()) {
        v.video_id = it->get<std::string>();
        ctx.video_id = v.video_id;
    } else {
        ctx.add(IssueKind::MissingField, "missing string field 'video_id'");
    }
    if (auto it = doc.find("genre"); it != doc.end() && it->is_string())
        v.genre = it->get<std::string>();
    else
        ctx.add(IssueKind::MissingField, "missing string field 'genre'");
    if (auto it = doc.find("duration_sec"); it != doc.end() && it->is_number())
        v.duration_sec = it->get<double>();
    else
        ctx.add(IssueKind::MissingField, "missing numeric field 'duration_sec'");

    auto scenes_it = doc.find("scenes");
    if (scenes_it == doc.end() || !scenes_it->is_array()) {
        ctx.add(IssueKind::MissingField, "missing array field 'scenes'");
        return std::nullopt;
    }
    if (scenes_it->empty()) ctx.add(IssueKind::EmptyScenes, "video has no scenes");

    std::size_t pos = 0;
    for (const auto& s : *scenes_it) {
        Scene scene;
        if (!s.is_object()) {
            ctx.add(IssueKind::MalformedJson, "scene " + std::to_string(pos) + " is not an object");
            ++pos;
            continue;
        }
        if (auto it = s.find("index"); it != s.end() && it->is_number_integer() &&
                                       it->get<long long>() >= 0)
            scene.index = it->get<std::size_t>();
        else
            ctx.add(IssueKind::MissingField,
                    "scene " + std::to_string(pos) + ": 'index' must be a non-negative integer");
        auto st = s.find("start_sec");
        auto en = s.find("end_sec");
        if (st == s.end() || en == s.end() || !st->is_number() || !en->is_number()) {
            ctx.add(IssueKind::MissingField,
                    "scene " + std::to_string(pos) + ": missing start_sec/end_sec");
        } else {
            scene.start_sec = st->get<double>();
            scene.end_sec = en->get<double>();
            if (!(scene.start_sec >= 0.0) || !(scene.start_sec < scene.end_sec))
                ctx.add(IssueKind::InvalidTiming, "scene " + std::to_string(pos) +
                                                      ": requires 0 <= start_sec < end_sec");
        }
        scene.active_visual = read_ids(s, "visual", Modality::Visual, registry, ctx, pos);
        scene.active_audio = read_ids(s, "audio", Modality::Audio, registry, ctx, pos);
        v.scenes.push_back(std::move(scene));
        ++pos;
    }

    for (std::size_t i = 1; i < v.scenes.size(); ++i) {
        const Scene& prev = v.scenes[i - 1];
        const Scene& cur = v.scenes[i];
        if (cur.index <= prev.index)
            ctx.add(IssueKind::InvalidTiming,
                    "scene " + std::to_string(i) + ": scene indices must increase");
        if (cur.start_sec < prev.end_sec - kTimeEps)
            ctx.add(IssueKind::OverlappingScenes, "scenes " + std::to_string(i - 1) + " and " +
                                                      std::to_string(i) + " overlap");
    }
    if (!v.scenes.empty() && v.scenes.back().end_sec > v.duration_sec + kDurationSlack)
        ctx.add(IssueKind::DurationExceeded, "last scene ends after duration_sec + 0.5");

    if (ctx.issues.size() != before) return std::nullopt;
    return v;
}

}  // namespace

Corpus parse_corpus_text(std::string_view text, const ElementRegistry& registry,
                         const ParseOptions& options) {
    Corpus corpus;
    std::vector<Issue> issues;
    std::map<std::string, std::size_t> position;

    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        LineContext ctx{line_no, {}, issues};
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            ctx.add(IssueKind::MalformedJson, e.what());
            continue;
        }
        auto video = parse_video(doc, registry, ctx);
        if (!video) continue;
        if (options.merge_adjacent) *video = merge_adjacent_scenes(*video);
        auto [it, inserted] = position.emplace(video->video_id, corpus.videos.size());
        if (inserted) {
            corpus.videos.push_back(std::move(*video));
        } else {
            ++corpus.duplicate_ids;
            corpus.warnings.push_back("duplicate video_id '" + video->video_id + "' at line " +
                                      std::to_string(line_no) + " replaces earlier entry");
            corpus.videos[it->second] = std::move(*video);
        }
    }

    if (!issues.empty()) throw CorpusError(std::move(issues));
    if (corpus.videos.empty())
        throw CorpusError({{IssueKind::EmptyCorpus, 0, {}, "empty corpus"}});
    return corpus;
}

Corpus parse_corpus(const std::filesystem::path& path, const ElementRegistry& registry,
                    const ParseOptions& options) {
    return parse_corpus_text(read_file(path), registry, options);
}

std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& v : corpus.videos) {
        json scenes = json::array();
        for (const auto& s : v.scenes)
            scenes.push_back({{"index", s.index},
                              {"start_sec", s.start_sec},
                              {"end_sec", s.end_sec},
                              {"visual", s.active_visual},
                              {"audio", s.active_audio}});
        json doc = {{"video_id", v.video_id},
                    {"genre", v.genre},
                    {"duration_sec", v.duration_sec},
                    {"scenes", scenes}};
        out += doc.dump();
        out += '\n';
    }
    return out;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << corpus_to_jsonl(corpus);
}

VideoAnnotation merge_adjacent_scenes(const VideoAnnotation& video) {
    VideoAnnotation out = video;
    out.scenes.clear();
    for (const auto& s : video.scenes) {
        if (!out.scenes.empty()) {
            Scene& last = out.scenes.back();
            if (last.active_visual == s.active_visual && last.active_audio == s.active_audio) {
                last.end_sec = s.end_sec;
                continue;
            }
        }
        out.scenes.push_back(s);
    }
    for (std::size_t i = 0; i < out.scenes.size(); ++i) out.scenes[i].index = i;
    return out;
}

// ---------------------------------------------------------------------------
// Alphabets

Alphabet::Alphabet(Modality m, std::vector<std::string> observed_symbols)
    : modality_(m), symbols_(std::move(observed_symbols)) {
    symbols_.push_back(m == Modality::Visual ? "V<oov>" : "A<oov>");
    for (std::size_t i = 0; i < symbols_.size(); ++i)
        if (!index_.emplace(symbols_[i], i).second)
            throw ValidationError("alphabet: duplicate symbol '" + symbols_[i] + "'");
}

std::size_t Alphabet::index_of(std::string_view symbol) const {
    auto it = index_.find(symbol);
    return it == index_.end() ? oov() : it->second;
}

std::string AlphabetPair::to_json() const {
    auto observed = [](const Alphabet& a) {
        return std::vector<std::string>(a.symbols().begin(), a.symbols().end() - 1);
    };
    return json{{"visual", observed(visual)}, {"audio", observed(audio)}}.dump(2);
}

AlphabetPair AlphabetPair::from_json(std::string_view text) {
    try {
        json doc = json::parse(text);
        return {Alphabet(Modality::Visual, doc.at("visual").get<std::vector<std::string>>()),
                Alphabet(Modality::Audio, doc.at("audio").get<std::vector<std::string>>())};
    } catch (const json::exception& e) {
        throw ValidationError(std::string("alphabets: ") + e.what());
    }
}

AlphabetPair build_alphabet(const Corpus& corpus, const ElementRegistry& registry) {
    if (corpus.videos.empty()) throw InvalidArgument("build_alphabet: empty corpus");
    std::vector<std::string> vis, aud;
    std::set<std::string, std::less<>> seen_v, seen_a;
    for (const auto& v : corpus.videos) {
        for (const auto& s : v.scenes) {
            auto sv = canonical_symbol(registry, Modality::Visual, s.active_visual);
            if (seen_v.insert(sv).second) vis.push_back(std::move(sv));
            auto sa = canonical_symbol(registry, Modality::Audio, s.active_audio);
            if (seen_a.insert(sa).second) aud.push_back(std::move(sa));
        }
    }
    return {Alphabet(Modality::Visual, std::move(vis)), Alphabet(Modality::Audio, std::move(aud))};
}

// ---------------------------------------------------------------------------
// Encoding

std::size_t segment_count(double duration_sec, double segment_seconds) {
    if (!(segment_seconds > 0.0)) throw InvalidArgument("segment_seconds must be > 0");
    const double ratio = duration_sec / segment_seconds;
    // tolerate floating noise such as 15.000000001 / 3
    const auto m = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
    return std::max<std::size_t>(m, 1);
}

std::size_t segment_index(const Scene& scene, double duration_sec, double segment_seconds) {
    const std::size_t m_count = segment_count(duration_sec, segment_seconds);
    const double mid = std::max(0.0, scene.midpoint());
    const auto m = static_cast<std::size_t>(std::floor(mid / segment_seconds));
    return std::min(m, m_count - 1);
}

std::size_t corpus_segment_count(const Corpus& corpus, double segment_seconds) {
    std::size_t m = 1;
    for (const auto& v : corpus.videos) m = std::max(m, segment_count(v.duration_sec, segment_seconds));
    return m;
}

EncodedSequence encode_video(const VideoAnnotation& video, const ElementRegistry& registry,
                             const AlphabetPair& alphabets, double segment_seconds,
                             std::size_t max_segments) {
    EncodedSequence seq;
    seq.video_id = video.video_id;
    const std::size_t t = video.scenes.size();
    seq.obs_visual.reserve(t);
    seq.obs_audio.reserve(t);
    seq.segment_of.reserve(t);
    for (const auto& s : video.scenes) {
        seq.obs_visual.push_back(
            alphabets.visual.index_of(canonical_symbol(registry, Modality::Visual, s.active_visual)));
        seq.obs_audio.push_back(
            alphabets.audio.index_of(canonical_symbol(registry, Modality::Audio, s.active_audio)));
        std::size_t m = segment_index(s, video.duration_sec, segment_seconds);
        if (max_segments) m = std::min(m, max_segments - 1);
        seq.segment_of.push_back(m);
    }
    return seq;
}

std::vector<EncodedSequence> encode_corpus(const Corpus& corpus, const ElementRegistry& registry,
                                           const AlphabetPair& alphabets, double segment_seconds,
                                           std::size_t max_segments) {
    std::vector<EncodedSequence> out;
    out.reserve(corpus.videos.size());
    for (const auto& v : corpus.videos)
        out.push_back(encode_video(v, registry, alphabets, segment_seconds, max_segments));
    return out;
}

// ---------------------------------------------------------------------------
// Category aggregation

int CategoryCounts::visual_total() const noexcept {
    int n = 0;
    for (int c : visual) n += c;
    return n;
}

int CategoryCounts::audio_total() const noexcept {
    int n = 0;
    for (int c : audio) n += c;
    return n;
}

CategoryCounts category_counts(const Scene& scene, const ElementRegistry& registry) {
    CategoryCounts counts;
    for (const auto& id : scene.active_visual)
        if (const Element* e = registry.find(id)) ++counts.visual[static_cast<std::size_t>(e->category)];
    for (const auto& id : scene.active_audio)
        if (const Element* e = registry.find(id)) ++counts.audio[static_cast<std::size_t>(e->category)];
    return counts;
}

}  // namespace adfe
