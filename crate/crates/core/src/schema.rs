//! WHoW labels: motives ("why"), dialogue acts ("how") and their definitions.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motive {
    Informational,
    Coordinative,
    Social,
}

impl Motive {
    pub const ALL: [Motive; 3] = [Motive::Informational, Motive::Coordinative, Motive::Social];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Motive::Informational => "informational",
            Motive::Coordinative => "coordinative",
            Motive::Social => "social",
        }
    }

    /// Label used in prompts and model answers, e.g. `"informational motive"`.
    pub fn prompt_label(self) -> String {
        format!("{} motive", self.name())
    }

    pub fn abbrev(self) -> &'static str {
        match self {
            Motive::Informational => "I",
            Motive::Coordinative => "C",
            Motive::Social => "S",
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            Motive::Informational => "Provide or acquire relevant information to constructively advance the topic or goal of the conversation.",
            Motive::Coordinative => "Ensure adherence to rules, plans, and broader contextual constraints, such as time and environment.",
            Motive::Social => "Enhance the social atmosphere and connections among participants by addressing feelings, emotions, and interpersonal dynamics within the group.",
        }
    }

    /// Accepts `informational`, `Informational motive`, `IM`, ...
    pub fn parse(label: &str) -> Option<Motive> {
        let l = label.trim().to_ascii_lowercase();
        let l = l.strip_suffix("motive").unwrap_or(&l).trim();
        match l {
            "informational" | "information" | "im" | "i" => Some(Motive::Informational),
            "coordinative" | "coordination" | "cm" | "c" => Some(Motive::Coordinative),
            "social" | "sm" | "s" => Some(Motive::Social),
            _ => None,
        }
    }
}

impl fmt::Display for Motive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DialogueAct {
    Probing,
    Confronting,
    Instruction,
    Interpretation,
    Supplement,
    Utility,
}

impl DialogueAct {
    pub const ALL: [DialogueAct; 6] = [
        DialogueAct::Probing,
        DialogueAct::Confronting,
        DialogueAct::Instruction,
        DialogueAct::Interpretation,
        DialogueAct::Supplement,
        DialogueAct::Utility,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            DialogueAct::Probing => "probing",
            DialogueAct::Confronting => "confronting",
            DialogueAct::Instruction => "instruction",
            DialogueAct::Interpretation => "interpretation",
            DialogueAct::Supplement => "supplement",
            DialogueAct::Utility => "utility",
        }
    }

    /// Option string offered to the annotator.
    pub fn prompt_label(self) -> &'static str {
        match self {
            DialogueAct::Probing => "Probing",
            DialogueAct::Confronting => "Confronting",
            DialogueAct::Instruction => "Instruction",
            DialogueAct::Interpretation => "Interpretation",
            DialogueAct::Supplement => "Supplement",
            DialogueAct::Utility => "All Utility",
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            DialogueAct::Probing => "Prompt speaker for responses.",
            DialogueAct::Confronting => "Prompt one speaker to response or engage with another speaker's statement, question or opinion.",
            DialogueAct::Instruction => "Explicitly command, influence, halt, or shape the immediate behavior of the recipients.",
            DialogueAct::Interpretation => "Clarify, reframe, summarize, paraphrase, or make connection to earlier conversation content.",
            DialogueAct::Supplement => "Enrich the conversation by supplementing details or information without immediately changing the target speaker's behavior.",
            DialogueAct::Utility => "All other unspecified acts.",
        }
    }

    pub fn parse(label: &str) -> Option<DialogueAct> {
        let l = label.trim().to_ascii_lowercase();
        let l = l.strip_prefix("all ").unwrap_or(&l);
        DialogueAct::ALL
            .into_iter()
            .find(|a| a.name() == l || a.name().get(..4) == Some(l))
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One (motive, dialogue act) intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub motive: Motive,
    pub act: DialogueAct,
}

impl Cell {
    pub fn new(motive: Motive, act: DialogueAct) -> Self {
        Cell { motive, act }
    }

    pub fn all() -> impl Iterator<Item = Cell> {
        Motive::ALL
            .into_iter()
            .flat_map(|m| DialogueAct::ALL.into_iter().map(move |a| Cell::new(m, a)))
    }

    /// `"informational/supplement"`; also the key format used in decision files.
    pub fn key(&self) -> String {
        format!("{}/{}", self.motive.name(), self.act.name())
    }

    pub fn parse_key(key: &str) -> Option<Cell> {
        let (m, a) = key.split_once(['/', '&', '·'])?;
        Some(Cell::new(Motive::parse(m)?, DialogueAct::parse(a)?))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.motive.name(), self.act.name())
    }
}

/// Exemplar sentences for every (act, motive) intersection with a short tag.
pub fn examples(act: DialogueAct, motive: Motive) -> &'static [(&'static str, &'static str)] {
    use DialogueAct::*;
    use Motive::*;
    match (act, motive) {
        (Probing, Informational) => &[
            ("Can you take that on?", "prompting"),
            ("As long as the political spectrum is covered overall, what's wrong with that?", "follow up question"),
            ("Siva?", "name calling prompt"),
        ],
        (Probing, Coordinative) => &[
            ("Which of you would like to go first?", "preference inquiry"),
            ("Did this gentleman come down yet?", "coordinative question"),
            ("It's working, right?", "question managing environment"),
        ],
        (Probing, Social) => &[
            ("Is that a relief to you or--", "asking feeling"),
            ("Could you tell us your name, please?", "social question"),
            ("Do you have eyeglasses?", "humour question"),
        ],
        (Confronting, Informational) => &[
            ("That landed pretty well I think, so can you respond to that?", "counter confronting"),
            ("On this side, do you want to respond, or do you agree?", "consensus confronting"),
            ("You actually asked a perfect question, and so Mark Zandi, do you want to take that on?", "confronting question"),
        ],
        (Confronting, Coordinative) => &[
            ("The other side care to respond, if not I'll move on.", "coordinative consensus"),
            ("Response from the other side, or do you want to pass?", "coordinative confronting"),
            ("Marc Thiessen, do you want to join your partner on this one, because I think--", "coordinative consensus"),
        ],
        (Confronting, Social) => &[
            ("Bryan Caplan, I think he just described your fantasy, come true.", "social confronting"),
            ("I'd love to hear your answer to that question, so go for it.", "confronting with affective appeal"),
            ("Jared Bernstein, the guy you called \"nuts\" just said you're unfair.", "humour confronting"),
        ],
        (Instruction, Informational) => &[
            ("Can you frame your question as a question?", "articulate instruction"),
            ("Relate that point to this motion.", "back to topic"),
            ("I want to stay on the merits of the Obama plan.", "manage topic"),
        ],
        (Instruction, Coordinative) => &[
            ("Remember, about 30 seconds is what you'll get.", "time control"),
            ("Can you go up three steps, please, and turn right?", "coordinating instruction"),
            ("I'll be right back after this message.", "program management"),
        ],
        (Instruction, Social) => &[
            ("Do not be afraid.", "emotion instruction"),
            ("Those who agree, just a round of applause to that.", "pro-social instruction"),
            ("--because it's turning into a personal attack.", "stop anti-social"),
        ],
        (Interpretation, Informational) => &[
            ("So, Matt, you're saying that it's not true that it's inevitable that Amazon will control everything.", "summarization"),
            ("Their point is that it would be a bad thing.", "simplification"),
            ("But that would be the question of mobility.", "reframe"),
        ],
        (Interpretation, Coordinative) => &[
            ("That was an ambiguous signal.", "situation interpretation"),
            ("You're pointing to Lawrence Korb.", "preference interpretation"),
            ("And you want the side arguing for the motion to address that", "preference interpretation"),
        ],
        (Interpretation, Social) => &[
            ("I think it was a rhetorical question, and it got a good laugh.", "humour interpretation"),
            ("And it's a little bit insulting almost to say", "toxicity interpretation"),
            ("--honestly, I don't think that was an--a personal attack--", "toxicity interpretation"),
        ],
        (Supplement, Informational) => &[
            ("I agree that it is.", "agreement"),
            ("The fact is that one of the US manufacturers, with 1 percent of its yearly production, would run us out of the whole market.", "add information"),
            ("They had never paid any attention whatsoever to Africa.", "share opinion"),
        ],
        (Supplement, Coordinative) => &[
            ("Fifty-one of you voted against the motion.", "vote reporting"),
            ("And the mic's coming down to you.", "describe situation"),
            ("Round two is where the debaters address each other directly", "rule explanation"),
        ],
        (Supplement, Social) => &[
            ("You have a colorful sleeve.", "social chit-chat"),
            ("I hate to reward it but I'm going to.", "encouragement"),
            ("And I think all of us probably share a sense that we want things to improve.", "state common feeling"),
        ],
        (Utility, Informational) => &[
            ("Fair question.", "acknowledgement"),
            ("Right", "acknowledgement"),
            ("So the--", "floor grabbing"),
        ],
        (Utility, Coordinative) => &[
            ("All right.", "backchanneling"),
            ("Actually, I--", "floor grabbing"),
            ("Well--", "floor grabbing"),
        ],
        (Utility, Social) => &[
            ("Thank you Evgeny Morozov.", "thanks"),
            ("I'm sorry.", "apology"),
            ("Hi.", "greeting"),
        ],
    }
}
