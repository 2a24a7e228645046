from rest_framework import serializers

SCHEMES = ["ie", "bdf2"]
GHOSTS = ["dir", "lps", "djump"]
FORMS = ["impl", "skew"]
GAMMA_SCALINGS = ["strip", "constant"]
SOLVER_CHOICES = ["lu", "gmres"]
PATTERNS = ["diagonal", "crisscross"]
NORMS = ["L2L2", "L2H1", "LinfL2"]


class LevelRangeField(serializers.Field):
    """A refinement level ``3`` or an inclusive range ``a:b``, as a list of ints."""

    default_error_messages = {
        "invalid": "Expected a level or a range 'a:b', got '{value}'.",
        "order": "Range '{value}' is empty.",
        "negative": "Levels must be non-negative, got '{value}'.",
    }

    def to_internal_value(self, data):
        text = str(data).strip()
        try:
            if ":" in text:
                start, stop = (int(part) for part in text.split(":", 1))
            else:
                start = stop = int(text)
        except ValueError:
            self.fail("invalid", value=text)
        if start < 0:
            self.fail("negative", value=text)
        if stop < start:
            self.fail("order", value=text)
        return list(range(start, stop + 1))

    def to_representation(self, value):
        value = list(value)
        if len(value) == 1:
            return str(value[0])
        return f"{value[0]}:{value[-1]}"


class CommaListField(serializers.ListField):
    """Accepts ``"a,b,c"`` as well as a real list."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [item.strip() for item in data.split(",") if item.strip()]
        return super().to_internal_value(data)


class CaseFileSerializer(serializers.Serializer):
    name = serializers.CharField(default="custom")
    box = serializers.ListField(
        child=serializers.FloatField(), min_length=4, max_length=4
    )
    T = serializers.FloatField()
    alpha = serializers.FloatField()
    phi = serializers.CharField()
    velocity = serializers.ListField(
        child=serializers.CharField(), min_length=2, max_length=2, required=False
    )
    div_velocity = serializers.CharField(required=False)
    w_inf = serializers.FloatField(required=False, min_value=0.0)
    initial = serializers.CharField(required=False)
    exact = serializers.CharField(required=False)
    source = serializers.CharField(required=False)
    dirichlet = serializers.CharField(required=False)
    h0 = serializers.FloatField(required=False)
    dt0 = serializers.FloatField(required=False)
    conservative = serializers.BooleanField(default=False)

    def to_internal_value(self, data):
        # numbers are valid expressions; YAML hands them over as int/float
        data = dict(data)
        for key in ("phi", "div_velocity", "initial", "exact", "source", "dirichlet"):
            if isinstance(data.get(key), (int, float)) and not isinstance(data[key], bool):
                data[key] = repr(data[key])
        if isinstance(data.get("velocity"), list):
            data["velocity"] = [
                repr(v) if isinstance(v, (int, float)) else v for v in data["velocity"]
            ]
        return super().to_internal_value(data)

    def validate_T(self, value):
        if value <= 0:
            raise serializers.ValidationError("Final time must be positive.")
        return value

    def validate_alpha(self, value):
        if value <= 0:
            raise serializers.ValidationError("Diffusivity must be positive.")
        return value

    def validate_h0(self, value):
        if value <= 0:
            raise serializers.ValidationError("Mesh size must be positive.")
        return value

    def validate_dt0(self, value):
        if value <= 0:
            raise serializers.ValidationError("Time step must be positive.")
        return value

    def validate_box(self, value):
        xmin, xmax, ymin, ymax = value
        if not (xmin < xmax and ymin < ymax):
            raise serializers.ValidationError("Box must satisfy xmin < xmax and ymin < ymax.")
        return value


class SolverOptionsSerializer(serializers.Serializer):
    """Options shared by ``run`` and ``convergence``."""

    scheme = serializers.ChoiceField(choices=SCHEMES)
    ghost = serializers.ChoiceField(choices=GHOSTS)
    form = serializers.ChoiceField(choices=FORMS)
    cgamma = serializers.FloatField()
    gamma_scaling = serializers.ChoiceField(choices=GAMMA_SCALINGS)
    conservative = serializers.BooleanField(default=False)
    dt_div = serializers.IntegerField(required=False, min_value=1)
    jitter = serializers.FloatField(default=0.0, min_value=0.0, max_value=0.3)
    seed = serializers.IntegerField(default=0)
    pattern = serializers.ChoiceField(choices=PATTERNS)
    nitsche = serializers.BooleanField(default=False)
    lambda0 = serializers.FloatField()
    solver = serializers.ChoiceField(choices=SOLVER_CHOICES)
    condition = serializers.BooleanField(default=False)
    dump_matrices = serializers.BooleanField(default=False)
    out = serializers.CharField()

    def validate_cgamma(self, value):
        if value <= 0:
            raise serializers.ValidationError("Stabilization constant must be positive.")
        return value

    def validate_lambda0(self, value):
        if value <= 0:
            raise serializers.ValidationError("Nitsche constant must be positive.")
        return value

    def validate_jitter(self, value):
        if value >= 0.3:
            raise serializers.ValidationError("Jitter must be below 0.3.")
        return value


class RunOptionsSerializer(SolverOptionsSerializer):
    Lx = serializers.IntegerField(min_value=0)
    Lt = serializers.IntegerField(min_value=0)


class ConvergenceOptionsSerializer(SolverOptionsSerializer):
    Lx = LevelRangeField()
    Lt = LevelRangeField()
    norms = CommaListField(child=serializers.ChoiceField(choices=NORMS), default=list(NORMS))
    cgamma_list = CommaListField(
        child=serializers.FloatField(min_value=0.0), required=False, allow_empty=False
    )

    def validate_cgamma_list(self, value):
        if any(v <= 0 for v in value):
            raise serializers.ValidationError("Stabilization constants must be positive.")
        return value

    def validate(self, attrs):
        if attrs.get("cgamma_list") and len(attrs["Lt"]) != 1:
            raise serializers.ValidationError(
                {"Lt": "The stabilization study runs at a single time level."}
            )
        return attrs


class ErrorReportSerializer(serializers.Serializer):
    l2l2 = serializers.FloatField(allow_null=True)
    l2h1 = serializers.FloatField(allow_null=True)
    linfl2 = serializers.FloatField(allow_null=True)
    step_l2 = serializers.ListField(child=serializers.FloatField())
    step_h1 = serializers.ListField(child=serializers.FloatField())
    masses = serializers.ListField(child=serializers.FloatField())
    mass_deviation = serializers.FloatField()


class EocTableSerializer(serializers.Serializer):
    norm = serializers.CharField()
    lx_levels = serializers.ListField(child=serializers.IntegerField())
    lt_levels = serializers.ListField(child=serializers.IntegerField())
    errors = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    eoc_x = serializers.ListField(child=serializers.FloatField(allow_null=True))
    eoc_t = serializers.ListField(child=serializers.FloatField(allow_null=True))
    eoc_xt = serializers.ListField(child=serializers.FloatField(allow_null=True))
    eoc_xtt = serializers.ListField(child=serializers.FloatField(allow_null=True))


class RunMetadataSerializer(serializers.Serializer):
    command = serializers.CharField()
    case = serializers.CharField()
    created = serializers.DateTimeField()
    options = serializers.DictField()
    quadrature_degree = serializers.IntegerField()
    error_quadrature_degree = serializers.IntegerField()
    notes = serializers.ListField(child=serializers.CharField())
    versions = serializers.DictField(child=serializers.CharField())
