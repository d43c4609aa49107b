"""Multi-task affective language toolkit: joint 7-class valence
classification and [0, 1] intensity regression over tweets."""

__version__ = "0.1.0"

from .corpus import (
    ClassHistogram,
    DatasetSplit,
    LabeledTweet,
    ValenceClass,
    class_to_ordinal,
    histogram,
    load_dataset,
    merge_splits,
    ordinal_to_class,
    save_dataset,
)
from .normalize import (
    EmojiLexicon,
    FrequencyLexicon,
    NormalizedTweet,
    NormalizeOptions,
    correct_spelling,
    normalize,
    replace_entities,
    segment_hashtag,
)
from .embed import (
    EmbeddingTable,
    TweetMatrix,
    compose_word_vector,
    encode_tweet,
    load_embedding_table,
)
from .features import (
    ExternalFeatureSet,
    FeatureConfig,
    FeatureSource,
    HandcraftedVector,
    ScoredLexicon,
    assemble_features,
    lexicon_features,
    load_external_features,
)
from .model import (
    Checkpoint,
    EncodedDataset,
    Model,
    ModelConfig,
    build_model,
    extract_representation,
    extract_representations,
    load_checkpoint,
    model_from_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .shallow import (
    LinearSvmModel,
    SvrModel,
    load_shallow,
    predict_svm,
    predict_svr,
    save_shallow,
    train_svm,
    train_svr,
)
from .evaluation import (
    EvalReport,
    confusion,
    evaluate_run,
    paired_ttest,
    pearson,
    polarity_flip_count,
)
