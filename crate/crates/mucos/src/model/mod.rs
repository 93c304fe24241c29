//! Sequence construction, the trainable encoder-classifier and its training
//! loop. Prediction heads share one encoder; relation and tail prediction
//! are trained as separate runs over positive triples only.

mod checkpoint;
mod encoder;
mod gradcheck;
mod params;
mod predict;
mod tokens;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use encoder::{cross_entropy, softmax, Encoder, LOG_CLAMP_EPS};
pub use gradcheck::gradient_check;
pub use params::{EncoderConfig, ModelState, ParamLayout, TensorSpec, TrainConfig};
pub use predict::{ContextProvider, Predictor};
pub use tokens::{
    build_relation_input, build_tail_input, TokenVocab, TrainingExample, BOS, PAD, SEP,
    SKELETON_LEN,
};
pub use train::{example_for_triple, train, AdamW, EpochRecord, TrainOptions, TrainReport};
