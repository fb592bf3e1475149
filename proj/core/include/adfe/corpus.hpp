#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adfe/error.hpp"

namespace adfe {

enum class Modality { Visual, Audio };
enum class Category { Attract, Brand, Connect, Direct, Other };

inline constexpr std::size_t kCategoryCount = 5;

std::string_view to_string(Modality m);
std::string_view to_string(Category c);
Modality parse_modality(std::string_view s);
Category parse_category(std::string_view s);

struct Element {
    std::string id;
    Modality modality;
    Category category;
    std::string label;
};

/// The set of binary expression elements an annotator may mark per scene.
class ElementRegistry {
public:
    ElementRegistry() = default;
    /// Throws ValidationError on duplicate ids.
    explicit ElementRegistry(std::vector<Element> elements);

    /// Eight visual and nine audio elements grouped into the ABCD categories.
    static ElementRegistry default_registry();
    static ElementRegistry from_json(std::string_view text);
    static ElementRegistry load(const std::filesystem::path& path);
    std::string to_json() const;

    const Element* find(std::string_view id) const;
    const std::vector<Element>& elements() const noexcept { return elements_; }
    /// Element ids of one modality, in registry order.
    std::vector<std::string> ids(Modality m) const;

private:
    std::vector<Element> elements_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

struct Scene {
    std::size_t index = 0;
    double start_sec = 0.0;
    double end_sec = 0.0;
    std::vector<std::string> active_visual;  // sorted, unique
    std::vector<std::string> active_audio;   // sorted, unique

    double midpoint() const noexcept { return 0.5 * (start_sec + end_sec); }
};

struct VideoAnnotation {
    std::string video_id;
    std::string genre;
    double duration_sec = 0.0;
    std::vector<Scene> scenes;
};

struct Corpus {
    std::vector<VideoAnnotation> videos;
    /// Number of lines whose video_id repeated an earlier one (last wins).
    std::size_t duplicate_ids = 0;
    std::vector<std::string> warnings;

    std::size_t scene_count() const noexcept;
};

enum class IssueKind {
    MalformedJson,
    MissingField,
    UnknownElement,
    ModalityMismatch,
    InvalidTiming,
    OverlappingScenes,
    EmptyScenes,
    DurationExceeded,
    EmptyCorpus,
};

std::string_view to_string(IssueKind k);

struct Issue {
    IssueKind kind;
    std::size_t line = 0;  // 1-based; 0 when not tied to a line
    std::string video_id;
    std::string message;
};

/// Raised when a corpus fails validation. Carries every issue found.
class CorpusError : public ValidationError {
public:
    explicit CorpusError(std::vector<Issue> issues);
    IssueKind kind() const noexcept { return issues_.front().kind; }
    const std::vector<Issue>& issues() const noexcept { return issues_; }

private:
    std::vector<Issue> issues_;
};

struct ParseOptions {
    /// Merge consecutive scenes that carry identical element sets.
    bool merge_adjacent = false;
};

/// "V[a|b]" / "A[a|b]" with ids sorted; ids must all be of modality `m`.
std::string canonical_symbol(const ElementRegistry& registry, Modality m,
                             std::span<const std::string> ids);

Corpus parse_corpus_text(std::string_view text, const ElementRegistry& registry,
                         const ParseOptions& options = {});
Corpus parse_corpus(const std::filesystem::path& path, const ElementRegistry& registry,
                    const ParseOptions& options = {});
/// Serialize as JSON-lines, one video per line.
std::string corpus_to_jsonl(const Corpus& corpus);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

VideoAnnotation merge_adjacent_scenes(const VideoAnnotation& video);

/// Symbol table for one modality. The last index is reserved for
/// combinations never seen while building.
class Alphabet {
public:
    Alphabet() = default;
    Alphabet(Modality m, std::vector<std::string> observed_symbols);

    Modality modality() const noexcept { return modality_; }
    std::size_t size() const noexcept { return symbols_.size(); }
    std::size_t oov() const noexcept { return symbols_.size() - 1; }
    std::size_t observed_size() const noexcept { return symbols_.size() - 1; }
    std::size_t index_of(std::string_view symbol) const;
    const std::string& symbol(std::size_t i) const { return symbols_.at(i); }
    const std::vector<std::string>& symbols() const noexcept { return symbols_; }

    friend bool operator==(const Alphabet& a, const Alphabet& b) {
        return a.modality_ == b.modality_ && a.symbols_ == b.symbols_;
    }

private:
    Modality modality_ = Modality::Visual;
    std::vector<std::string> symbols_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

struct AlphabetPair {
    Alphabet visual;
    Alphabet audio;

    std::string to_json() const;
    static AlphabetPair from_json(std::string_view text);
    friend bool operator==(const AlphabetPair&, const AlphabetPair&) = default;
};

AlphabetPair build_alphabet(const Corpus& corpus, const ElementRegistry& registry);

struct EncodedSequence {
    std::string video_id;
    std::vector<std::size_t> obs_visual;
    std::vector<std::size_t> obs_audio;
    std::vector<std::size_t> segment_of;

    std::size_t length() const noexcept { return obs_visual.size(); }
};

inline constexpr double kDefaultSegmentSeconds = 3.0;

/// Number of fixed-length segments covering a video.
std::size_t segment_count(double duration_sec, double segment_seconds);
std::size_t segment_index(const Scene& scene, double duration_sec, double segment_seconds);
/// Largest segment_count over the corpus.
std::size_t corpus_segment_count(const Corpus& corpus, double segment_seconds);

/// `max_segments` clamps segment indices for videos longer than the model
/// was built for; 0 means no clamp.
EncodedSequence encode_video(const VideoAnnotation& video, const ElementRegistry& registry,
                             const AlphabetPair& alphabets, double segment_seconds,
                             std::size_t max_segments = 0);

std::vector<EncodedSequence> encode_corpus(const Corpus& corpus, const ElementRegistry& registry,
                                           const AlphabetPair& alphabets, double segment_seconds,
                                           std::size_t max_segments = 0);

/// Active element counts per category, indexed by Category.
struct CategoryCounts {
    std::array<int, kCategoryCount> visual{};
    std::array<int, kCategoryCount> audio{};

    int visual_total() const noexcept;
    int audio_total() const noexcept;
};

CategoryCounts category_counts(const Scene& scene, const ElementRegistry& registry);

}  // namespace adfe
