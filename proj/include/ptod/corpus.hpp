#pragma once
// Source corpus loaders and the canonical on-disk dialogue format.
//
// Canonical files are line-delimited JSON, one dialogue per line, UTF-8,
// schema_version on every record. Serialization is key-ordered so a
// read/write round trip is byte-identical.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ptod/types.hpp"

namespace ptod::corpus {

constexpr int kSchemaVersion = 1;

// Raw service/domain name -> canonical lowercase service vocabulary.
// Names absent from the table fall back to lowercasing and stripping a
// trailing _<digits> suffix (SGD style).
using ServiceMap = std::map<std::string, std::string>;

ServiceMap default_service_map();
ServiceMap load_service_map(const std::filesystem::path& file);
std::string canonical_service(const std::string& raw, const ServiceMap& map);

// MultiWOZ-2.2 layout: dialogues_*.json arrays (optionally under split
// subdirectories), schema.json, and optionally dialog_acts.json keyed by
// dialogue id and turn id.
std::vector<Dialogue> load_multiwoz(const std::filesystem::path& dir,
                                    const ServiceMap& service_map = default_service_map());

// SGD layout: dialogues_*.json arrays with per-frame actions and
// service_results; schema.json per directory or split.
std::vector<Dialogue> load_sgd(const std::filesystem::path& dir,
                               const ServiceMap& service_map = default_service_map());

// Keeps dialogues whose services do not intersect `domains`; order preserved.
std::vector<Dialogue> exclude_domains(const std::vector<Dialogue>& dialogues,
                                      const std::set<std::string>& domains);

CorpusManifest manifest_of(const std::vector<Dialogue>& dialogues);

// Validates and writes one dialogue per line; returns the manifest of
// what was written. The manifest is also written next to the corpus as
// <path>.manifest.json.
CorpusManifest write_canonical(const std::vector<Dialogue>& dialogues,
                               const std::filesystem::path& path);

std::vector<Dialogue> read_canonical(const std::filesystem::path& path);

// Single-record codecs, shared with the journal.
std::string dialogue_to_json_line(const Dialogue& d);
Dialogue dialogue_from_json_line(const std::string& line);

std::string manifest_to_json(const CorpusManifest& m);

}  // namespace ptod::corpus
