#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace wgg::prompts {

// Game prompt templates, one per group count. Placeholders: "#*#" = total
// word count, "$*$" = group count, "{}" = rendered word pool. The template
// texts are shipped as-is, including their fixed "groups of 4 words"
// phrasing and exemplar sizes.

inline constexpr const char* kGamePrompt2Groups =
    "I am going to give you a pool of #*# words. These #*# words can be separated into $*$ "
    "equal groups of 4 words linked under some category. I want you to tell me the four groups "
    "and what category you think connects them. Here is an example: Given the pool ['Mile', "
    "'League', 'Jazz', 'Heat', 'Yard', 'Cabaret', 'Carousel', 'Nets', 'Gobble', 'Scarf', "
    "'Foot', 'Bucks', 'Chow', 'Wolf', 'Cats', 'Chicago'], you would output: <NBA TEAMS>: "
    "['Bucks', 'Heat', 'Jazz', 'Nets'], <UNITS OF LENGTH>: ['Foot', 'League', 'Mile', 'Yard'], "
    "<Synonyms For Eat>: ['Chow', 'Gobble', 'Scarf', 'Wolf'], <Musicals Beginning With 'C'>: "
    "['Cabaret', 'Carousel', 'Cats', 'Chicago']. Now, given the pool: {}. The answer must be "
    "$*$ groups, each of them containing 4 words and defined by one category, and the output "
    "format must be the same as the example. Give me the answer immediately.";

inline constexpr const char* kGamePrompt3Groups =
    "I am going to give you a pool of #*# words. These #*# words can be separated into $*$ "
    "equal groups of 4 words linked under some category. I want you to tell me the four groups "
    "and what category you think connects them. Here is an example: Given the pool ['Water', "
    "'Happiness', 'Fire', 'Earth', 'Mercury', 'Surprise', 'Wind', 'Sadness', 'Venus', 'Pluto', "
    "'Angry', 'Mars'], you would output: <Natural Elements>: ['Water', 'Fire', 'Earth', "
    "'Wind'], <Emotions>: ['Happiness', 'Sadness', 'Angry', 'Surprise'], <Planets>: "
    "['Mercury', 'Venus', 'Pluto', 'Mars']. Now, given the pool: {}. The answer must be $*$ "
    "groups, each of them containing 4 words and defined by one category, and the output "
    "format must be the same as the example. Give me the answer immediately.";

inline constexpr const char* kGamePrompt4Groups =
    "I am going to give you a pool of #*# words. These #*# words can be separated into $*$ "
    "equal groups of 4 words linked under some category. I want you to tell me the four groups "
    "and what category you think connects them. Here is an example: Given the pool ['Water', "
    "'Fire', 'Sad', 'Wind', 'Happy', 'Earth', 'Angry', 'Surprised'], you would output: "
    "<Natural Elements>: ['Water', 'Fire', 'Earth', 'Wind'], <Emotions>: "
    "['Happy','Sad','Angry','Surprised']. Now, given the pool: {}. The answer must be $*$ "
    "groups, each of them containing 4 words and defined by one category, and the output "
    "format must be the same as the example. Give me the answer immediately.";

inline constexpr const char* kReformatPrompt =
    "Please reformat the following response into a format mapping topic names, encased by < "
    "and > with no single quotes, to a list of Python single-quote strings containing the "
    "words in a topic (removing the single quotes within each word, like the ' in 'Newton's'). "
    "An example of the format is: <Water>: ['Lake', 'River', 'Pond', 'Ocean'], <Family>: "
    "['Uncle', 'Niece', 'Mom', 'Sister'], <American Food>: ['Burger', 'Pizza', 'Wings', "
    "'Steak'], <Precious Metals>: ['Gold', 'Rhodium', 'Platinum', 'Nickel Silver']. Please "
    "reformat the following response, outputting only the final reformatted version:";

// Overlap probe template. Placeholders: LIST_TOPICS, LIST_WORDS.
inline constexpr const char* kOverlapPrompt =
    "I am going to give you a list of words, as well as a list of topics each word could fall "
    "under. Please group the words under each topic, with replacement, allowing words to be "
    "grouped under several topics. Each word must be used at least once. Output only these "
    "groups in Python dictionary format, mapping a string representing the topic to a list of "
    "strings representing the selected candidate words for that topics. Here is an example -- "
    "given 4 topics [\"NBA Teams\", \"Units of Length\", \"Synonyms For Eat\", \"Musicals "
    "Beginning With 'C'\"] and 16 words [\"Bucks\", \"Foot\", \"Chow\", \"Gobble\", \"Scarf\", "
    "\"Cabaret\", \"Carousel\", \"Cats\", \"Chicago\", \"Wolf\", \"League\", \"Mile\", "
    "\"Yard\", \"Heat\", \"Jazz\", \"Nets\"], you could output in Python dictionary format: "
    "\"NBA TEAMS\": [\"Bucks\", \"Heat\", \"Jazz\", \"Nets\", \"Mile\", \"Chicago\"], \"UNITS "
    "OF LENGTH\": [\"Foot\", \"League\", \"Mile\", \"Yard\", \"Carousel\", \"Bucks\"], "
    "\"Synonyms For Eat\": [\"Chow\", \"Gobble\", \"Scarf\", \"Wolf\", \"Cats\", \"Bucks\"], "
    "\"Musicals Beginning With 'C'\": [\"Cabaret\", \"Carousel\", \"Cats\", \"Chicago\", "
    "\"Chow\"]. Here is the list of topics: LIST_TOPICS . Here is the pool of words from which "
    "you can select from: LIST_WORDS. Output solely the groups in the previously specified "
    "Python dictionary format.";

inline const char* game_template(int group_count) {
    switch (group_count) {
        case 2: return kGamePrompt2Groups;
        case 3: return kGamePrompt3Groups;
        case 4: return kGamePrompt4Groups;
        default: throw std::invalid_argument("no prompt template for group count " +
                                             std::to_string(group_count));
    }
}

// Writes the templates out as plain text assets, placeholders intact.
inline void write_assets(const std::string& dir) {
    auto write = [&](const std::string& name, const char* text) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw std::runtime_error("cannot write prompt asset: " + dir + "/" + name);
        out << text << '\n';
    };
    write("game_2_groups.txt", kGamePrompt2Groups);
    write("game_3_groups.txt", kGamePrompt3Groups);
    write("game_4_groups.txt", kGamePrompt4Groups);
    write("reformat.txt", kReformatPrompt);
    write("overlap.txt", kOverlapPrompt);
}

}  // namespace wgg::prompts
