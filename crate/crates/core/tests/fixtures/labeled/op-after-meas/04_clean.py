from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

a = QuantumRegister(1, "a")
b = QuantumRegister(1, "b")
c = ClassicalRegister(2, "c")
qc = QuantumCircuit(a, b, c)
qc.h(a[0])
qc.x(b[0])
qc.cx(a[0], b[0])
qc.measure(1, 1)
qc.measure(a[0], c[0])
