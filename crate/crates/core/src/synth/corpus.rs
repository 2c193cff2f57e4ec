use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{
    save_sequence, CoeffLayout, CoeffSequence, ConditioningLabel, ConversationManifest, IdentityCoeffs, MotionFrame,
    Participant, Role, TurnEntry, MOTION_DIM,
};
use crate::error::{Error, Result};
use crate::synth::{assemble_features, listener_step, speaker_step, SpeakerLatents, SynthConfig, SynthWorld};

/// Aggregates over every stored file of a corpus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub conversations: usize,
    pub turns: usize,
    pub frames: usize,
    /// Mean of `|β|` over both participants, all frames and all 64 dims.
    pub mean_abs_beta: f64,
    /// Mean energy feature over all audio frames.
    pub mean_energy: f64,
}

#[derive(Default)]
struct Partial {
    turns: usize,
    frames: usize,
    abs_beta: f64,
    beta_count: usize,
    energy: f64,
}

pub fn split_of(config: &SynthConfig, index: usize) -> &'static str {
    let train = config.num_conversations - config.val_conversations - config.test_conversations;
    if index < train {
        "train"
    } else if index < train + config.val_conversations {
        "val"
    } else {
        "test"
    }
}

fn random_identity<R: Rng>(rng: &mut R) -> IdentityCoeffs {
    let mut id = IdentityCoeffs::zeros(&CoeffLayout::default());
    for v in id
        .alpha
        .iter_mut()
        .chain(id.delta.iter_mut())
        .chain(id.gamma.iter_mut())
    {
        *v = rng.random_range(-0.1f32..0.1);
    }
    id
}

fn label(vocab: &crate::coeffs::ConditioningVocabulary, id: usize) -> ConditioningLabel {
    ConditioningLabel {
        vocabulary: vocab.name.clone(),
        label_id: id,
    }
}

fn write_conversation(config: &SynthConfig, world: &SynthWorld, index: usize, dir: &Path) -> Result<Partial> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64 + 1);

    let identities = [random_identity(&mut rng), random_identity(&mut rng)];
    let p_speaks_first = rng.random_bool(0.5);
    let turns = config.turns_per_conversation;
    let plan: Vec<(usize, usize, usize, usize)> = (0..turns)
        .map(|i| {
            let p_speaks = p_speaks_first ^ (i % 2 == 1);
            let speaker = if p_speaks { 0 } else { 1 };
            let len = rng.random_range(config.min_frames..=config.max_frames);
            let act = rng.random_range(0..config.dialog_act_vocabulary.len());
            let attitude = rng.random_range(0..config.attitude_vocabulary.len());
            (speaker, len, act, attitude)
        })
        .collect();

    let mut latents = [
        SpeakerLatents::new(config, &mut rng),
        SpeakerLatents::new(config, &mut rng),
    ];
    let mut motion: [MotionFrame; 2] = [[0.0; MOTION_DIM]; 2];
    let mut last_energy = 0.0;
    let mut step = |speaker: usize, act: usize, attitude: usize, rng: &mut ChaCha8Rng| {
        let listener = 1 - speaker;
        let heard = listener_step(
            world,
            config,
            &motion[listener],
            &motion[speaker],
            last_energy,
            attitude,
        );
        let [a, b] = &mut latents;
        let lat = if speaker == 0 { a } else { b };
        let (spoken, audio) = speaker_step(world, config, lat, &motion[speaker], Some(&motion[listener]), act, rng);
        motion[listener] = heard;
        motion[speaker] = spoken;
        last_energy = audio.energy;
        (motion, audio)
    };

    let (s0, _, act0, att0) = plan[0];
    for _ in 0..config.warmup_frames {
        step(s0, act0, att0, &mut rng);
    }

    let mut partial = Partial::default();
    let mut entries = Vec::with_capacity(turns);
    for (i, &(speaker, len, act, attitude)) in plan.iter().enumerate() {
        let mut tracks: [Vec<MotionFrame>; 2] = [Vec::with_capacity(len), Vec::with_capacity(len)];
        let mut raw = Vec::with_capacity(len);
        for _ in 0..len {
            let (m, audio) = step(speaker, act, attitude, &mut rng);
            tracks[0].push(m[0]);
            tracks[1].push(m[1]);
            raw.push(audio);
        }
        let features = assemble_features(&raw)?;
        let seqs = [
            CoeffSequence::from_motion(&tracks[0], config.fps),
            CoeffSequence::from_motion(&tracks[1], config.fps),
        ];
        let n = i + 1;
        let audio_path = format!("turn_{n:02}_audio.vcaf");
        let p_path = format!("turn_{n:02}_p.vcof");
        let q_path = format!("turn_{n:02}_q.vcof");
        features.save(&dir.join(&audio_path))?;
        save_sequence(&dir.join(&p_path), &seqs[0])?;
        save_sequence(&dir.join(&q_path), &seqs[1])?;

        partial.turns += 1;
        partial.frames += len;
        partial.energy += features.frames.iter().map(|f| f64::from(f.energy)).sum::<f64>();
        for s in &seqs {
            for f in &s.frames {
                partial.abs_beta += f.beta.iter().map(|b| f64::from(b.abs())).sum::<f64>();
                partial.beta_count += f.beta.len();
            }
        }

        let labels = |who: usize| {
            if who == speaker {
                label(&config.dialog_act_vocabulary, act)
            } else {
                label(&config.attitude_vocabulary, attitude)
            }
        };
        let role_of_p = if speaker == 0 { Role::Speaker } else { Role::Listener };
        entries.push(TurnEntry {
            turn_index: n as u32,
            role_of_p: role_of_p.indicator(),
            conditioning: labels(0),
            conditioning_q: Some(labels(1)),
            audio_feature_path: audio_path,
            coeffs_p_path: p_path,
            coeffs_q_path: q_path,
        });
    }

    identities[0].save(&dir.join("identity_p.json"))?;
    identities[1].save(&dir.join("identity_q.json"))?;
    let participants = BTreeMap::from([
        (
            "P".to_string(),
            Participant {
                identity_path: "identity_p.json".into(),
            },
        ),
        (
            "Q".to_string(),
            Participant {
                identity_path: "identity_q.json".into(),
            },
        ),
    ]);
    let manifest = ConversationManifest {
        fps: config.fps,
        layout: CoeffLayout::default(),
        vocabularies: vec![config.attitude_vocabulary.clone(), config.dialog_act_vocabulary.clone()],
        participants,
        turns: entries,
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    let violations = manifest.validate(dir);
    if !violations.is_empty() {
        return Err(Error::Manifest(violations));
    }
    Ok(partial)
}

/// Writes `out/{train,val,test}/conv_XXXX/` with a manifest, identities,
/// features and both participants' coefficients per turn, plus the resolved
/// config and the corpus statistics at the root. Regenerating with the same
/// config produces identical bytes.
pub fn synth_corpus(config: &SynthConfig, out: &Path) -> Result<CorpusStats> {
    config.check()?;
    let world = SynthWorld::new(config);
    let partials: Vec<Result<Partial>> = (0..config.num_conversations)
        .into_par_iter()
        .map(|i| {
            let dir = out.join(split_of(config, i)).join(format!("conv_{i:04}"));
            write_conversation(config, &world, i, &dir)
        })
        .collect();
    let mut total = Partial::default();
    for p in partials {
        let p = p?;
        total.turns += p.turns;
        total.frames += p.frames;
        total.abs_beta += p.abs_beta;
        total.beta_count += p.beta_count;
        total.energy += p.energy;
    }
    let stats = CorpusStats {
        conversations: config.num_conversations,
        turns: total.turns,
        frames: total.frames,
        mean_abs_beta: total.abs_beta / total.beta_count.max(1) as f64,
        mean_energy: total.energy / total.frames.max(1) as f64,
    };
    let write_json = |name: &str, bytes: Vec<u8>| {
        let mut bytes = bytes;
        bytes.push(b'\n');
        crate::format::write_file(&out.join(name), &bytes)
    };
    write_json("synth_config.json", serde_json::to_vec_pretty(config)?)?;
    write_json("corpus_stats.json", serde_json::to_vec_pretty(&stats)?)?;
    Ok(stats)
}
