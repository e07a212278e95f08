#pragma once

#include <stdexcept>
#include <string>

namespace vnfad {

/// Base class for every error raised by the library. The CLI maps the
/// category onto its process exit code.
class Error : public std::runtime_error {
public:
    enum class Category { usage = 1, data = 2, model = 3 };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

/// Malformed or insufficient input data (CSV parse errors, too few records,
/// misaligned evaluation inputs).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(Category::data, what) {}
};

/// Corrupt, incompatible or unusable model files and fitted models.
class ModelError : public Error {
public:
    explicit ModelError(const std::string& what) : Error(Category::model, what) {}
};

/// A caller violated a documented precondition (dimension or schema mismatch).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(Category::model, what) {}
};

/// Invalid threshold, training or roster configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(Category::usage, what) {}
};

/// Training produced a non-finite or exploding cost.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error(Category::model, what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(Category::data, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Category::data, what) {}
};

}  // namespace vnfad
