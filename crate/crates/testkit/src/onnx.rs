//! A tiny bag-of-keywords sequence classifier in ONNX form.
//!
//! Graph: `Gather(embedding, input_ids) * mask → ReduceSum(axis 1) →
//! MatMul → Add`, producing one logit per label. Every keyword adds
//! `strength` to the logit of its label; other tokens contribute nothing.
//! The padding token has a non-zero embedding so that an ignored mask shows
//! up in the logits.

use std::io;
use std::path::Path;

use prost::Message;
use tract_onnx::pb::attribute_proto::AttributeType;
use tract_onnx::pb::tensor_proto::DataType;
use tract_onnx::pb::tensor_shape_proto::{dimension, Dimension};
use tract_onnx::pb::type_proto::{self, Tensor};
use tract_onnx::pb::{
    AttributeProto, GraphProto, ModelProto, NodeProto, OperatorSetIdProto, TensorProto, TensorShapeProto,
    TypeProto, ValueInfoProto,
};

/// Description of the model to write.
#[derive(Debug, Clone)]
pub struct KeywordModel {
    /// Display names in logit order.
    pub labels: Vec<String>,
    /// `(token, logit index)`; tokens are added to the vocabulary in order.
    pub keywords: Vec<(String, usize)>,
    /// Extra vocabulary entries with no effect on the logits.
    pub filler: Vec<String>,
    pub strength: f32,
    /// Constant added to each logit.
    pub bias: Vec<f32>,
    pub max_seq_len: usize,
    /// Number of logits the graph emits; anything but 8 is a broken model.
    pub n_outputs: usize,
}

impl KeywordModel {
    /// Vocabulary as written to `vocab.txt`.
    pub fn vocab(&self) -> Vec<String> {
        let mut v: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"].iter().map(|s| s.to_string()).collect();
        v.extend(self.keywords.iter().map(|(k, _)| k.clone()));
        v.extend(self.filler.iter().cloned());
        v
    }

    fn embedding(&self) -> (usize, Vec<f32>) {
        let vocab = self.vocab();
        let d = self.n_outputs;
        let mut emb = vec![0.0f32; vocab.len() * d];
        // [PAD]: only harmless when the mask zeroes it out
        for x in &mut emb[..d] {
            *x = 100.0;
        }
        for (i, (_, label)) in self.keywords.iter().enumerate() {
            emb[(4 + i) * d + label] = self.strength;
        }
        (vocab.len(), emb)
    }
}

fn tensor(name: &str, dims: &[i64], data: Vec<f32>) -> TensorProto {
    TensorProto {
        name: name.into(),
        dims: dims.to_vec(),
        data_type: DataType::Float as i32,
        float_data: data,
        ..Default::default()
    }
}

fn int_tensor(name: &str, dims: &[i64], data: Vec<i64>) -> TensorProto {
    TensorProto {
        name: name.into(),
        dims: dims.to_vec(),
        data_type: DataType::Int64 as i32,
        int64_data: data,
        ..Default::default()
    }
}

fn node(op: &str, inputs: &[&str], output: &str, attribute: Vec<AttributeProto>) -> NodeProto {
    NodeProto {
        op_type: op.into(),
        name: format!("{op}_{output}"),
        input: inputs.iter().map(|s| s.to_string()).collect(),
        output: vec![output.into()],
        attribute,
        ..Default::default()
    }
}

fn int_attr(name: &str, i: i64) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        r#type: AttributeType::Int as i32,
        i,
        ..Default::default()
    }
}

fn ints_attr(name: &str, ints: Vec<i64>) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        r#type: AttributeType::Ints as i32,
        ints,
        ..Default::default()
    }
}

fn value_info(name: &str, elem: DataType, dims: &[&str]) -> ValueInfoProto {
    let dim = dims
        .iter()
        .map(|d| Dimension {
            value: Some(match d.parse::<i64>() {
                Ok(n) => dimension::Value::DimValue(n),
                Err(_) => dimension::Value::DimParam(d.to_string()),
            }),
            ..Default::default()
        })
        .collect();
    ValueInfoProto {
        name: name.into(),
        r#type: Some(TypeProto {
            value: Some(type_proto::Value::TensorType(Tensor {
                elem_type: elem as i32,
                shape: Some(TensorShapeProto { dim }),
            })),
            ..Default::default()
        }),
        ..Default::default()
    }
}

/// Serialized ONNX model bytes.
pub fn keyword_model_bytes(spec: &KeywordModel) -> Vec<u8> {
    let (v, emb) = spec.embedding();
    let d = spec.n_outputs;
    let mut identity = vec![0.0f32; d * d];
    for i in 0..d {
        identity[i * d + i] = 1.0;
    }
    let mut bias = spec.bias.clone();
    bias.resize(d, 0.0);
    let graph = GraphProto {
        name: "keyword_classifier".into(),
        node: vec![
            node("Gather", &["embedding", "input_ids"], "embedded", vec![int_attr("axis", 0)]),
            node("Cast", &["attention_mask"], "mask_f", vec![int_attr("to", DataType::Float as i64)]),
            node("Reshape", &["mask_f", "mask_shape"], "mask_3d", vec![]),
            node("Mul", &["embedded", "mask_3d"], "masked", vec![]),
            node(
                "ReduceSum",
                &["masked"],
                "pooled",
                vec![ints_attr("axes", vec![1]), int_attr("keepdims", 0)],
            ),
            node("MatMul", &["pooled", "classifier"], "scores", vec![]),
            node("Add", &["scores", "classifier_bias"], "logits", vec![]),
        ],
        initializer: vec![
            tensor("embedding", &[v as i64, d as i64], emb),
            tensor("classifier", &[d as i64, d as i64], identity),
            tensor("classifier_bias", &[d as i64], bias),
            int_tensor("mask_shape", &[3], vec![1, -1, 1]),
        ],
        input: vec![
            value_info("input_ids", DataType::Int64, &["1", "seq"]),
            value_info("attention_mask", DataType::Int64, &["1", "seq"]),
        ],
        output: vec![value_info("logits", DataType::Float, &["1", &d.to_string()])],
        ..Default::default()
    };
    let model = ModelProto {
        ir_version: 7,
        producer_name: "darkscan-testkit".into(),
        opset_import: vec![OperatorSetIdProto {
            domain: String::new(),
            version: 11,
        }],
        graph: Some(graph),
        ..Default::default()
    };
    model.encode_to_vec()
}

/// Writes `weights.onnx`, `vocab.txt`, `labels.json` and `config.json`.
pub fn write_keyword_model(dir: &Path, spec: &KeywordModel) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("weights.onnx"), keyword_model_bytes(spec))?;
    std::fs::write(dir.join("vocab.txt"), spec.vocab().join("\n") + "\n")?;
    std::fs::write(dir.join("labels.json"), serde_json::to_string(&spec.labels)?)?;
    let config = serde_json::json!({
        "max_seq_len": spec.max_seq_len,
        "lowercase": true,
        "base_model": "keyword-fixture",
    });
    std::fs::write(dir.join("config.json"), config.to_string())?;
    Ok(())
}
