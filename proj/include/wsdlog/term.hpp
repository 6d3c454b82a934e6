#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <utility>

namespace wsdlog {

/// Term kinds, in canonical order. The declaration order doubles as the
/// ordering used everywhere results have to be enumerated deterministically:
/// constants by name, then labeled nulls, frozen nulls, function constants
/// and fillers by id, and variables last.
enum class TermKind : std::uint8_t {
    Constant,
    LabeledNull,
    FrozenNull,
    FunctionConstant,
    Filler,
    Variable,
};

/// An immutable term of the universe. Constants and variables carry a name,
/// the generated kinds carry a numeric id drawn from a monotonic counter
/// local to whichever algorithm invented them.
class Term {
public:
    Term() : kind_(TermKind::Filler), id_(0) {}

    static Term constant(std::string name) { return Term(TermKind::Constant, std::move(name), 0); }
    static Term variable(std::string name) { return Term(TermKind::Variable, std::move(name), 0); }
    static Term labeled_null(std::uint64_t id) { return Term(TermKind::LabeledNull, {}, id); }
    static Term frozen_null(std::uint64_t id) { return Term(TermKind::FrozenNull, {}, id); }
    static Term function_constant(std::uint64_t id) { return Term(TermKind::FunctionConstant, {}, id); }
    static Term filler() { return Term(TermKind::Filler, {}, 0); }

    TermKind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    std::uint64_t id() const { return id_; }

    bool is_constant() const { return kind_ == TermKind::Constant; }
    bool is_variable() const { return kind_ == TermKind::Variable; }
    bool is_labeled_null() const { return kind_ == TermKind::LabeledNull; }

    /// Constant, frozen null, function constant or filler: never remapped by
    /// a homomorphism.
    bool is_rigid() const { return kind_ != TermKind::Variable && kind_ != TermKind::LabeledNull; }

    /// Generated kinds are excluded from the active domain and from answers.
    bool is_special() const { return kind_ != TermKind::Constant && kind_ != TermKind::Variable; }

    friend auto operator<=>(const Term&, const Term&) = default;
    friend bool operator==(const Term&, const Term&) = default;

private:
    Term(TermKind kind, std::string name, std::uint64_t id)
        : kind_(kind), name_(std::move(name)), id_(id) {}

    TermKind kind_;
    std::string name_;
    std::uint64_t id_;
};

}  // namespace wsdlog
