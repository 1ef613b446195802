//! Planning data: plants, products, materials and customer orders over a
//! day-granular horizon, plus CSV ingestion, validation and entity lookup.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Files that make up a dataset directory, in load order.
pub const DATASET_FILES: [&str; 8] = [
    "plants.csv",
    "capacity.csv",
    "products.csv",
    "proc.csv",
    "bom.csv",
    "materials.csv",
    "receipts.csv",
    "orders.csv",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningInstance {
    pub id: String,
    pub horizon: Vec<NaiveDate>,
    pub plants: Vec<Plant>,
    pub products: Vec<Product>,
    pub materials: Vec<Material>,
    pub orders: Vec<Order>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub id: String,
    pub name: String,
    /// Available hours per day.
    pub capacity: BTreeMap<NaiveDate, f64>,
    /// Hours per unit; a missing entry means the product cannot be made here.
    pub proc_time: BTreeMap<String, f64>,
    pub unit_cost: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    pub name: String,
    /// kg of each material consumed per unit.
    pub bom: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub id: String,
    pub name: String,
    pub initial_inventory: f64,
    pub receipts: BTreeMap<NaiveDate, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: String,
    pub product_id: String,
    pub quantity: f64,
    pub due_date: NaiveDate,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Plant,
    Product,
    Material,
    Order,
}

impl EntityKind {
    pub const ALL: [EntityKind; 4] = [
        EntityKind::Plant,
        EntityKind::Product,
        EntityKind::Material,
        EntityKind::Order,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Plant => "plant",
            EntityKind::Product => "product",
            EntityKind::Material => "material",
            EntityKind::Order => "order",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EntityKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for EntityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub kind: EntityKind,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    Found(EntityRef),
    /// Entities sharing at least one word with the mention.
    NoMatch { candidates: Vec<EntityRef> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("mention is empty")]
    EmptyMention,
    #[error("mention is ambiguous between {} entities", .candidates.len())]
    AmbiguousMention { candidates: Vec<EntityRef> },
}

/// A violated instance invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// `Type.field` naming the invariant, e.g. `Order.quantity`.
    pub invariant: String,
    pub id: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} [{}]: {}", self.invariant, self.id, self.message)
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),
    #[error("malformed row in {file} line {line}: {detail}")]
    MalformedRow {
        file: String,
        line: u64,
        detail: String,
    },
    #[error("dangling {kind} reference {id:?}")]
    DanglingReference { kind: String, id: String },
    #[error("horizon is not a contiguous run of days")]
    NonContiguousHorizon,
    #[error("instance violates {} invariant(s)", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PlanningInstance {
    pub fn plant(&self, id: &str) -> Option<&Plant> {
        self.plants.iter().find(|p| p.id == id)
    }

    pub fn product(&self, id: &str) -> Option<&Product> {
        self.products.iter().find(|p| p.id == id)
    }

    pub fn material(&self, id: &str) -> Option<&Material> {
        self.materials.iter().find(|m| m.id == id)
    }

    pub fn order(&self, id: &str) -> Option<&Order> {
        self.orders.iter().find(|o| o.id == id)
    }

    pub fn contains_date(&self, date: NaiveDate) -> bool {
        self.horizon.binary_search(&date).is_ok()
    }

    /// Zero-based day offset of `date` within the horizon.
    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        self.horizon.binary_search(&date).ok()
    }

    pub fn exists(&self, entity: &EntityRef) -> bool {
        match entity.kind {
            EntityKind::Plant => self.plant(&entity.id).is_some(),
            EntityKind::Product => self.product(&entity.id).is_some(),
            EntityKind::Material => self.material(&entity.id).is_some(),
            EntityKind::Order => self.order(&entity.id).is_some(),
        }
    }

    pub fn display_name(&self, entity: &EntityRef) -> Option<&str> {
        match entity.kind {
            EntityKind::Plant => self.plant(&entity.id).map(|e| e.name.as_str()),
            EntityKind::Product => self.product(&entity.id).map(|e| e.name.as_str()),
            EntityKind::Material => self.material(&entity.id).map(|e| e.name.as_str()),
            EntityKind::Order => self.order(&entity.id).map(|e| e.id.as_str()),
        }
    }

    /// (kind, id, name) for every entity, in kind order then file order.
    pub fn entities(&self) -> Vec<(EntityKind, &str, &str)> {
        let mut out = Vec::new();
        out.extend(self.plants.iter().map(|e| (EntityKind::Plant, e.id.as_str(), e.name.as_str())));
        out.extend(self.products.iter().map(|e| (EntityKind::Product, e.id.as_str(), e.name.as_str())));
        out.extend(self.materials.iter().map(|e| (EntityKind::Material, e.id.as_str(), e.name.as_str())));
        out.extend(self.orders.iter().map(|e| (EntityKind::Order, e.id.as_str(), e.id.as_str())));
        out
    }
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    // chrono accepts unpadded fields; the wire format does not.
    if s.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(s, DATE_FORMAT).ok()
}

struct CsvFile {
    name: &'static str,
    records: Vec<(u64, csv::StringRecord)>,
}

impl CsvFile {
    fn open(dir: &Path, name: &'static str, columns: &[&str]) -> Result<Self, DataError> {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(DataError::MissingFile(path));
        }
        let bytes = fs::read(&path).map_err(|source| DataError::Io {
            path: path.clone(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        let malformed = |line: u64, detail: String| DataError::MalformedRow {
            file: name.to_string(),
            line,
            detail,
        };
        let headers = reader
            .headers()
            .map_err(|e| malformed(1, e.to_string()))?
            .clone();
        let got: Vec<&str> = headers.iter().collect();
        if got != columns {
            return Err(malformed(
                1,
                format!("expected header {:?}, found {:?}", columns.join(","), got.join(",")),
            ));
        }
        let mut records = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                malformed(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != columns.len() {
                return Err(malformed(line, format!("expected {} fields", columns.len())));
            }
            records.push((line, record));
        }
        Ok(CsvFile { name, records })
    }

    fn err(&self, line: u64, detail: impl Into<String>) -> DataError {
        DataError::MalformedRow {
            file: self.name.to_string(),
            line,
            detail: detail.into(),
        }
    }

    fn number(&self, line: u64, record: &csv::StringRecord, idx: usize) -> Result<f64, DataError> {
        let raw = &record[idx];
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(line, format!("field {} is not a finite number: {raw:?}", idx + 1))),
        }
    }

    fn date(&self, line: u64, record: &csv::StringRecord, idx: usize) -> Result<NaiveDate, DataError> {
        let raw = &record[idx];
        parse_date(raw)
            .ok_or_else(|| self.err(line, format!("field {} is not a YYYY-MM-DD date: {raw:?}", idx + 1)))
    }

    fn text(&self, line: u64, record: &csv::StringRecord, idx: usize) -> Result<String, DataError> {
        let raw = record[idx].to_string();
        if raw.is_empty() {
            return Err(self.err(line, format!("field {} is empty", idx + 1)));
        }
        Ok(raw)
    }
}

fn dangling(kind: &str, id: &str) -> DataError {
    DataError::DanglingReference {
        kind: kind.to_string(),
        id: id.to_string(),
    }
}

/// Loads and validates a dataset directory. The instance id is the
/// directory's file name.
pub fn parse_instance(dataset_dir: &Path) -> Result<PlanningInstance, DataError> {
    let id = dataset_dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("dataset")
        .to_string();
    parse_instance_with_id(dataset_dir, &id)
}

pub fn parse_instance_with_id(dataset_dir: &Path, id: &str) -> Result<PlanningInstance, DataError> {
    // Open everything first so a missing file is reported before row errors.
    let plants_csv = CsvFile::open(dataset_dir, "plants.csv", &["id", "name"])?;
    let capacity_csv = CsvFile::open(dataset_dir, "capacity.csv", &["plant_id", "date", "hours"])?;
    let products_csv = CsvFile::open(dataset_dir, "products.csv", &["id", "name"])?;
    let proc_csv = CsvFile::open(
        dataset_dir,
        "proc.csv",
        &["plant_id", "product_id", "hours_per_unit", "cost_per_unit"],
    )?;
    let bom_csv = CsvFile::open(dataset_dir, "bom.csv", &["product_id", "material_id", "kg_per_unit"])?;
    let materials_csv = CsvFile::open(dataset_dir, "materials.csv", &["id", "name", "initial_kg"])?;
    let receipts_csv = CsvFile::open(dataset_dir, "receipts.csv", &["material_id", "date", "kg"])?;
    let orders_csv = CsvFile::open(
        dataset_dir,
        "orders.csv",
        &["id", "product_id", "quantity", "due_date", "weight"],
    )?;

    let mut plants = Vec::new();
    for (line, r) in &plants_csv.records {
        plants.push(Plant {
            id: plants_csv.text(*line, r, 0)?,
            name: plants_csv.text(*line, r, 1)?,
            capacity: BTreeMap::new(),
            proc_time: BTreeMap::new(),
            unit_cost: BTreeMap::new(),
        });
    }

    let mut horizon_days = BTreeSet::new();
    for (line, r) in &capacity_csv.records {
        let plant_id = capacity_csv.text(*line, r, 0)?;
        let date = capacity_csv.date(*line, r, 1)?;
        let hours = capacity_csv.number(*line, r, 2)?;
        let plant = plants
            .iter_mut()
            .find(|p| p.id == plant_id)
            .ok_or_else(|| dangling("plant", &plant_id))?;
        if plant.capacity.insert(date, hours).is_some() {
            return Err(capacity_csv.err(*line, format!("duplicate capacity for {plant_id} on {date}")));
        }
        horizon_days.insert(date);
    }
    let horizon: Vec<NaiveDate> = horizon_days.into_iter().collect();
    if horizon.windows(2).any(|w| w[0].succ_opt() != Some(w[1])) {
        return Err(DataError::NonContiguousHorizon);
    }

    let mut products = Vec::new();
    for (line, r) in &products_csv.records {
        products.push(Product {
            id: products_csv.text(*line, r, 0)?,
            name: products_csv.text(*line, r, 1)?,
            bom: BTreeMap::new(),
        });
    }

    for (line, r) in &proc_csv.records {
        let plant_id = proc_csv.text(*line, r, 0)?;
        let product_id = proc_csv.text(*line, r, 1)?;
        let hours = proc_csv.number(*line, r, 2)?;
        let cost = proc_csv.number(*line, r, 3)?;
        if !products.iter().any(|p| p.id == product_id) {
            return Err(dangling("product", &product_id));
        }
        let plant = plants
            .iter_mut()
            .find(|p| p.id == plant_id)
            .ok_or_else(|| dangling("plant", &plant_id))?;
        plant.proc_time.insert(product_id.clone(), hours);
        plant.unit_cost.insert(product_id, cost);
    }

    let mut materials = Vec::new();
    for (line, r) in &materials_csv.records {
        materials.push(Material {
            id: materials_csv.text(*line, r, 0)?,
            name: materials_csv.text(*line, r, 1)?,
            initial_inventory: materials_csv.number(*line, r, 2)?,
            receipts: BTreeMap::new(),
        });
    }

    for (line, r) in &bom_csv.records {
        let product_id = bom_csv.text(*line, r, 0)?;
        let material_id = bom_csv.text(*line, r, 1)?;
        let kg = bom_csv.number(*line, r, 2)?;
        if !materials.iter().any(|m| m.id == material_id) {
            return Err(dangling("material", &material_id));
        }
        let product = products
            .iter_mut()
            .find(|p| p.id == product_id)
            .ok_or_else(|| dangling("product", &product_id))?;
        product.bom.insert(material_id, kg);
    }

    for (line, r) in &receipts_csv.records {
        let material_id = receipts_csv.text(*line, r, 0)?;
        let date = receipts_csv.date(*line, r, 1)?;
        let kg = receipts_csv.number(*line, r, 2)?;
        let material = materials
            .iter_mut()
            .find(|m| m.id == material_id)
            .ok_or_else(|| dangling("material", &material_id))?;
        *material.receipts.entry(date).or_insert(0.0) += kg;
    }

    let mut orders = Vec::new();
    for (line, r) in &orders_csv.records {
        let order = Order {
            id: orders_csv.text(*line, r, 0)?,
            product_id: orders_csv.text(*line, r, 1)?,
            quantity: orders_csv.number(*line, r, 2)?,
            due_date: orders_csv.date(*line, r, 3)?,
            weight: orders_csv.number(*line, r, 4)?,
        };
        if !products.iter().any(|p| p.id == order.product_id) {
            return Err(dangling("product", &order.product_id));
        }
        orders.push(order);
    }

    let instance = PlanningInstance {
        id: id.to_string(),
        horizon,
        plants,
        products,
        materials,
        orders,
    };
    let diagnostics = validate_instance(&instance);
    if diagnostics.is_empty() {
        Ok(instance)
    } else {
        Err(DataError::Invalid(diagnostics))
    }
}

/// Writes the dataset CSV set for `instance` into `dir` (created if absent).
pub fn write_instance(instance: &PlanningInstance, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let d = |date: &NaiveDate| date.format(DATE_FORMAT).to_string();
    let mut files: Vec<(&str, Vec<Vec<String>>, &[&str])> = Vec::new();

    files.push((
        "plants.csv",
        instance.plants.iter().map(|p| vec![p.id.clone(), p.name.clone()]).collect(),
        &["id", "name"],
    ));
    files.push((
        "capacity.csv",
        instance
            .plants
            .iter()
            .flat_map(|p| p.capacity.iter().map(|(t, h)| vec![p.id.clone(), d(t), h.to_string()]))
            .collect(),
        &["plant_id", "date", "hours"],
    ));
    files.push((
        "products.csv",
        instance.products.iter().map(|p| vec![p.id.clone(), p.name.clone()]).collect(),
        &["id", "name"],
    ));
    files.push((
        "proc.csv",
        instance
            .plants
            .iter()
            .flat_map(|p| {
                p.proc_time.iter().map(|(prod, h)| {
                    let cost = p.unit_cost.get(prod).copied().unwrap_or(0.0);
                    vec![p.id.clone(), prod.clone(), h.to_string(), cost.to_string()]
                })
            })
            .collect(),
        &["plant_id", "product_id", "hours_per_unit", "cost_per_unit"],
    ));
    files.push((
        "bom.csv",
        instance
            .products
            .iter()
            .flat_map(|p| p.bom.iter().map(|(m, kg)| vec![p.id.clone(), m.clone(), kg.to_string()]))
            .collect(),
        &["product_id", "material_id", "kg_per_unit"],
    ));
    files.push((
        "materials.csv",
        instance
            .materials
            .iter()
            .map(|m| vec![m.id.clone(), m.name.clone(), m.initial_inventory.to_string()])
            .collect(),
        &["id", "name", "initial_kg"],
    ));
    files.push((
        "receipts.csv",
        instance
            .materials
            .iter()
            .flat_map(|m| m.receipts.iter().map(|(t, kg)| vec![m.id.clone(), d(t), kg.to_string()]))
            .collect(),
        &["material_id", "date", "kg"],
    ));
    files.push((
        "orders.csv",
        instance
            .orders
            .iter()
            .map(|o| {
                vec![
                    o.id.clone(),
                    o.product_id.clone(),
                    o.quantity.to_string(),
                    d(&o.due_date),
                    o.weight.to_string(),
                ]
            })
            .collect(),
        &["id", "product_id", "quantity", "due_date", "weight"],
    ));

    for (name, rows, header) in files {
        let path = dir.join(name);
        let io = |source: std::io::Error| DataError::Io {
            path: path.clone(),
            source,
        };
        let mut writer = csv::Writer::from_path(&path).map_err(|e| io(e.into()))?;
        writer.write_record(header).map_err(|e| io(e.into()))?;
        for row in rows {
            writer.write_record(&row).map_err(|e| io(e.into()))?;
        }
        writer.flush().map_err(io)?;
    }
    Ok(())
}

/// Checks every instance invariant; returns one diagnostic per violation.
pub fn validate_instance(instance: &PlanningInstance) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |invariant: &str, id: &str, message: String| {
        out.push(Diagnostic {
            invariant: invariant.to_string(),
            id: id.to_string(),
            message,
        })
    };

    if instance
        .horizon
        .windows(2)
        .any(|w| w[0].succ_opt() != Some(w[1]))
    {
        push(
            "PlanningInstance.horizon",
            &instance.id,
            "horizon must be contiguous and strictly increasing".into(),
        );
    }

    fn duplicates<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
        let mut seen = BTreeSet::new();
        let mut dups = Vec::new();
        for id in ids {
            if !seen.insert(id) {
                dups.push(id);
            }
        }
        dups
    }
    for id in duplicates(instance.plants.iter().map(|e| e.id.as_str())) {
        push("Plant.id", id, "duplicate plant id".into());
    }
    for id in duplicates(instance.products.iter().map(|e| e.id.as_str())) {
        push("Product.id", id, "duplicate product id".into());
    }
    for id in duplicates(instance.materials.iter().map(|e| e.id.as_str())) {
        push("Material.id", id, "duplicate material id".into());
    }
    for id in duplicates(instance.orders.iter().map(|e| e.id.as_str())) {
        push("Order.id", id, "duplicate order id".into());
    }

    for plant in &instance.plants {
        for day in &instance.horizon {
            match plant.capacity.get(day) {
                None => push("Plant.capacity", &plant.id, format!("no capacity defined for {day}")),
                Some(h) if !(*h >= 0.0) => {
                    push("Plant.capacity", &plant.id, format!("negative capacity {h} on {day}"))
                }
                _ => {}
            }
        }
        for day in plant.capacity.keys() {
            if !instance.contains_date(*day) {
                push("Plant.capacity", &plant.id, format!("capacity date {day} outside horizon"));
            }
        }
        for (product, hours) in &plant.proc_time {
            if !(*hours > 0.0) {
                push("Plant.proc_time", &plant.id, format!("processing time for {product} must be > 0"));
            }
            if instance.product(product).is_none() {
                push("Plant.proc_time", &plant.id, format!("unknown product {product}"));
            }
        }
        for (product, cost) in &plant.unit_cost {
            if !(*cost >= 0.0) {
                push("Plant.unit_cost", &plant.id, format!("unit cost for {product} must be >= 0"));
            }
        }
    }

    for product in &instance.products {
        for (material, kg) in &product.bom {
            if instance.material(material).is_none() {
                push("Product.bom", &product.id, format!("unknown material {material}"));
            }
            if !(*kg >= 0.0) {
                push("Product.bom", &product.id, format!("negative quantity for {material}"));
            }
        }
    }

    for material in &instance.materials {
        if !(material.initial_inventory >= 0.0) {
            push("Material.initial_inventory", &material.id, "initial inventory must be >= 0".into());
        }
        for (day, kg) in &material.receipts {
            if !instance.contains_date(*day) {
                push("Material.receipts", &material.id, format!("receipt dated {day} is outside the horizon"));
            }
            if !(*kg >= 0.0) {
                push("Material.receipts", &material.id, format!("negative receipt on {day}"));
            }
        }
    }

    for order in &instance.orders {
        if instance.product(&order.product_id).is_none() {
            push("Order.product_id", &order.id, format!("unknown product {}", order.product_id));
        }
        if !(order.quantity > 0.0) {
            push("Order.quantity", &order.id, "quantity must be > 0".into());
        }
        if !(order.weight > 0.0) {
            push("Order.weight", &order.id, "weight must be > 0".into());
        }
        if !instance.contains_date(order.due_date) {
            push("Order.due_date", &order.id, format!("due date {} is outside the horizon", order.due_date));
        }
    }
    out
}

fn words(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.len() >= 3)
        .map(str::to_lowercase)
        .collect()
}

/// Resolves a free-text mention to an entity: case-insensitive exact match
/// on id or name first, then a unique substring match.
pub fn resolve_entity(mention: &str, instance: &PlanningInstance) -> Result<Resolution, ResolveError> {
    resolve_entity_of(mention, instance, None)
}

/// Like [`resolve_entity`], restricted to one entity kind when given.
pub fn resolve_entity_of(
    mention: &str,
    instance: &PlanningInstance,
    kind: Option<EntityKind>,
) -> Result<Resolution, ResolveError> {
    let needle = mention.trim().to_lowercase();
    if needle.is_empty() {
        return Err(ResolveError::EmptyMention);
    }
    let pool: Vec<(EntityKind, &str, &str)> = instance
        .entities()
        .into_iter()
        .filter(|(k, _, _)| kind.is_none_or(|want| *k == want))
        .collect();
    let to_ref = |(k, id, _): &(EntityKind, &str, &str)| EntityRef {
        kind: *k,
        id: id.to_string(),
    };

    let exact: Vec<EntityRef> = pool
        .iter()
        .filter(|(_, id, name)| id.to_lowercase() == needle || name.to_lowercase() == needle)
        .map(to_ref)
        .collect();
    match exact.len() {
        1 => return Ok(Resolution::Found(exact.into_iter().next().unwrap())),
        n if n > 1 => return Err(ResolveError::AmbiguousMention { candidates: exact }),
        _ => {}
    }

    let partial: Vec<EntityRef> = pool
        .iter()
        .filter(|(_, id, name)| id.to_lowercase().contains(&needle) || name.to_lowercase().contains(&needle))
        .map(to_ref)
        .collect();
    match partial.len() {
        0 => {
            let mention_words = words(&needle);
            let candidates = pool
                .iter()
                .filter(|(_, id, name)| {
                    let w = words(id);
                    let n = words(name);
                    !mention_words.is_disjoint(&w) || !mention_words.is_disjoint(&n)
                })
                .map(to_ref)
                .collect();
            Ok(Resolution::NoMatch { candidates })
        }
        1 => Ok(Resolution::Found(partial.into_iter().next().unwrap())),
        _ => Err(ResolveError::AmbiguousMention { candidates: partial }),
    }
}

/// Path of the bundled tire-plant dataset shipped with this crate.
pub fn bundled_fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("tire_plant")
}
